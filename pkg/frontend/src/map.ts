// Leaflet glue: renders what the ViewModel decides.

import * as L from 'leaflet';
import type { Bbox, CellCollection, LatLng, RouteFeature } from './api';
import { cellTooltip } from './format';
import type { ViewModel } from './state';

const MIN_CELL_ZOOM = 14;

export class MapView {
  readonly map: L.Map;
  private cellLayer: L.GeoJSON | undefined;
  private routeLine: L.Polyline | undefined;
  private fromMarker: L.CircleMarker | undefined;
  private toMarker: L.CircleMarker | undefined;

  constructor(
    container: string | HTMLElement,
    private readonly model: ViewModel,
    center: LatLng = { lat: 52.5, lon: 13.4 },
    zoom = 15,
  ) {
    this.map = L.map(container).setView([center.lat, center.lon], zoom);
    L.tileLayer('https://tile.openstreetmap.org/{z}/{x}/{y}.png', {
      maxZoom: 19,
      attribution: '&copy; OpenStreetMap contributors',
    }).addTo(this.map);

    this.map.on('click', (ev: L.LeafletMouseEvent) => {
      void this.model.placeMarker({ lat: ev.latlng.lat, lon: ev.latlng.lng });
    });
    this.map.on('moveend zoomend', () => this.refreshCells());
  }

  refreshCells(): void {
    if (this.map.getZoom() < MIN_CELL_ZOOM) return;
    const b = this.map.getBounds();
    const bbox: Bbox = [b.getWest(), b.getSouth(), b.getEast(), b.getNorth()];
    void this.model.loadCells(bbox);
  }

  showCells(cells: CellCollection): void {
    const layer = L.geoJSON(cells as unknown as GeoJSON.FeatureCollection, {
      style: (feature) => ({
        color: '#444',
        weight: 0.5,
        fillColor: (feature?.properties as { color?: string })?.color ?? '#888',
        fillOpacity: 0.55,
      }),
      onEachFeature: (feature, lyr) => {
        const props = feature.properties as Parameters<typeof cellTooltip>[0];
        lyr.bindTooltip(cellTooltip(props), { sticky: true });
      },
    });
    this.cellLayer?.remove();
    this.cellLayer = layer.addTo(this.map);
  }

  showMarkers(from: LatLng | undefined, to: LatLng | undefined): void {
    this.fromMarker?.remove();
    this.toMarker?.remove();
    this.fromMarker = from ? this.dot(from, '#1d4ed8') : undefined;
    this.toMarker = to ? this.dot(to, '#b91c1c') : undefined;
  }

  dimRoute(): void {
    this.routeLine?.setStyle({ opacity: 0.35 });
  }

  showRoute(route: RouteFeature): void {
    const latlngs = route.geometry.coordinates.map(
      (pos) => [pos[1], pos[0]] as L.LatLngTuple,
    );
    this.routeLine?.remove();
    this.routeLine = L.polyline(latlngs, { color: '#0ea5e9', weight: 5, opacity: 0.9 }).addTo(
      this.map,
    );
  }

  clearRoute(): void {
    this.routeLine?.remove();
    this.routeLine = undefined;
  }

  private dot(p: LatLng, color: string): L.CircleMarker {
    return L.circleMarker([p.lat, p.lon], {
      radius: 7,
      color,
      fillColor: color,
      fillOpacity: 0.9,
    }).addTo(this.map);
  }
}
