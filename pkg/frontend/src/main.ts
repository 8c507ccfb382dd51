import { ApiClient } from './api';
import { routeSummary } from './format';
import { MapView } from './map';
import { ViewModel } from './state';
import type { StatusLevel } from './state';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const sliderInput = el<HTMLInputElement>('slider');
const sliderLabel = el<HTMLElement>('slider-value');
const summaryBox = el<HTMLElement>('route-summary');
const statusBox = el<HTMLElement>('status');
const clearButton = el<HTMLButtonElement>('clear');

let statusTimer: number | undefined;
function showStatus(message: string, level: StatusLevel): void {
  statusBox.textContent = message;
  statusBox.className = `status ${level}`;
  if (statusTimer !== undefined) window.clearTimeout(statusTimer);
  statusTimer = window.setTimeout(() => {
    statusBox.textContent = '';
    statusBox.className = 'status';
  }, 6000);
}

const api = new ApiClient('');
let view: MapView;

const model = new ViewModel(api, {
  onCells: (cells) => view.showCells(cells),
  onRoutePending: () => view.dimRoute(),
  onRoute: (route) => {
    view.showRoute(route);
    summaryBox.textContent = routeSummary(route.properties);
  },
  onRouteCleared: () => {
    view.clearRoute();
    summaryBox.textContent = '';
  },
  onStatus: showStatus,
  onMarkers: (from, to) => view.showMarkers(from, to),
});

view = new MapView('map', model);

sliderInput.addEventListener('input', () => {
  void model.setSlider(Number(sliderInput.value));
  sliderLabel.textContent = String(model.slider);
});
clearButton.addEventListener('click', () => model.clearMarkers());
sliderLabel.textContent = sliderInput.value;

api
  .health()
  .then((h) => showStatus(`connected: ${h.cells} cells from ${h.rides} rides`, 'info'))
  .catch(() => showStatus('service unreachable', 'error'));

view.refreshCells();
