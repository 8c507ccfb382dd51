// View model: everything the map client does, minus the actual rendering.
// Keeping it DOM- and Leaflet-free makes the what-if loop (slider -> route)
// and the latest-wins request handling directly testable.

import { ApiClient, ApiError } from './api';
import type { Bbox, CellCollection, LatLng, RouteFeature } from './api';
import { bboxKey } from './format';

export type StatusLevel = 'info' | 'error';

export interface ViewEvents {
  /** fresh cells for the given bbox arrived (cache hits replay this) */
  onCells(cells: CellCollection, key: string): void;
  /** a route request went out; current route should render dimmed */
  onRoutePending(): void;
  onRoute(route: RouteFeature): void;
  /** no displayable route (cleared markers or 404) */
  onRouteCleared(): void;
  onStatus(message: string, level: StatusLevel): void;
  onMarkers(from: LatLng | undefined, to: LatLng | undefined): void;
}

const CELL_CACHE_LIMIT = 48;

export class ViewModel {
  private sliderValue = 0;
  from: LatLng | undefined;
  to: LatLng | undefined;
  route: RouteFeature | undefined;

  /** sq of the route request issued most recently; the slider control must
   *  always show exactly this value once a request is out */
  lastIssuedSq: number | undefined;

  private cellCache = new Map<string, CellCollection>();
  private routeAbort: AbortController | undefined;
  private routeSeq = 0;

  constructor(
    private readonly api: ApiClient,
    private readonly events: ViewEvents,
  ) {}

  get slider(): number {
    return this.sliderValue;
  }

  setSlider(value: number): Promise<void> {
    const clamped = Math.min(10, Math.max(0, Math.round(value)));
    if (clamped === this.sliderValue) return Promise.resolve();
    this.sliderValue = clamped;
    // the what-if loop: a slider change re-plans immediately
    if (this.from && this.to) return this.planRoute();
    return Promise.resolve();
  }

  /** map click: first sets the origin, second the destination, then resets */
  placeMarker(p: LatLng): Promise<void> {
    if (!this.from || (this.from && this.to)) {
      this.from = p;
      this.to = undefined;
      this.route = undefined;
      this.events.onRouteCleared();
    } else {
      this.to = p;
    }
    this.events.onMarkers(this.from, this.to);
    if (this.from && this.to) return this.planRoute();
    return Promise.resolve();
  }

  clearMarkers(): void {
    this.from = undefined;
    this.to = undefined;
    this.route = undefined;
    this.routeAbort?.abort();
    this.events.onMarkers(undefined, undefined);
    this.events.onRouteCleared();
  }

  async planRoute(): Promise<void> {
    if (!this.from || !this.to) return;
    this.routeAbort?.abort();
    const abort = new AbortController();
    this.routeAbort = abort;
    const seq = ++this.routeSeq;
    this.lastIssuedSq = this.sliderValue;
    this.events.onRoutePending();
    try {
      const route = await this.api.route(this.from, this.to, this.sliderValue, abort.signal);
      if (seq !== this.routeSeq) return; // a newer request superseded this one
      this.route = route;
      this.events.onRoute(route);
    } catch (err) {
      if (seq !== this.routeSeq || abort.signal.aborted) return;
      if (err instanceof ApiError && err.status === 404) {
        this.route = undefined;
        this.events.onRouteCleared();
        this.events.onStatus('no route between the selected points', 'info');
      } else {
        // markers stay where they are; the user can retry
        this.events.onStatus(`route request failed: ${message(err)}`, 'error');
      }
    }
  }

  async loadCells(bbox: Bbox): Promise<void> {
    const key = bboxKey(bbox);
    const cached = this.cellCache.get(key);
    if (cached) {
      this.events.onCells(cached, key);
      return;
    }
    try {
      const cells = await this.api.cells(bbox);
      this.cellCache.set(key, cells);
      if (this.cellCache.size > CELL_CACHE_LIMIT) {
        const oldest = this.cellCache.keys().next().value;
        if (oldest !== undefined) this.cellCache.delete(oldest);
      }
      this.events.onCells(cells, key);
    } catch (err) {
      // stale layer is retained: no onCells event on failure
      if (err instanceof ApiError && err.status === 413) {
        this.events.onStatus('area too large, zoom in to load cells', 'info');
      } else {
        this.events.onStatus(`loading cells failed: ${message(err)}`, 'error');
      }
    }
  }
}

function message(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}
