import type { CellProperties, RouteProperties } from './api';

// Hover text for one grid cell; mean always with two decimals.
export function cellTooltip(props: CellProperties): string {
  return (
    `mean ${props.mean.toFixed(2)} | median ${props.median}` +
    ` | stddev ${props.stddev.toFixed(2)} | rides ${props.ride_count}`
  );
}

export function routeSummary(props: RouteProperties): string {
  const km = props.length_m / 1000;
  const length = km >= 10 ? km.toFixed(1) : km.toFixed(2);
  return `${length} km, mean quality ${props.mean_quality.toFixed(2)}`;
}

export function bboxKey(bbox: readonly number[]): string {
  return bbox.map((v) => v.toFixed(5)).join(',');
}
