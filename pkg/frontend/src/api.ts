// Typed client for the two read endpoints the UI consumes.
// The UI never mutates grid data; everything flows through these calls.

export interface LatLng {
  lat: number;
  lon: number;
}

export type Bbox = [minLon: number, minLat: number, maxLon: number, maxLat: number];

export interface CellProperties {
  mean: number;
  median: number;
  stddev: number;
  ride_count: number;
  sample_count: number;
  color: string;
}

export interface CellFeature {
  type: 'Feature';
  id: string;
  geometry: { type: 'Polygon'; coordinates: number[][][] };
  properties: CellProperties;
}

export interface CellCollection {
  type: 'FeatureCollection';
  features: CellFeature[];
}

export interface RouteProperties {
  length_m: number;
  weight: number;
  mean_quality: number;
  nodes: string[];
}

export interface RouteFeature {
  type: 'Feature';
  geometry: { type: 'LineString'; coordinates: number[][] };
  properties: RouteProperties;
}

export interface Health {
  status: string;
  rides: number;
  cells: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function errorOf(resp: Response): Promise<ApiError> {
  let message = `HTTP ${resp.status}`;
  try {
    const body = (await resp.json()) as { error?: string };
    if (body.error) message = body.error;
  } catch {
    // non-JSON error body: keep the status text
  }
  return new ApiError(resp.status, message);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  async cells(bbox: Bbox, signal?: AbortSignal): Promise<CellCollection> {
    const query = `bbox=${bbox.join(',')}`;
    const resp = await this.fetchFn(`${this.baseUrl}/api/cells?${query}`, { signal });
    if (!resp.ok) throw await errorOf(resp);
    return (await resp.json()) as CellCollection;
  }

  async route(from: LatLng, to: LatLng, sq: number, signal?: AbortSignal): Promise<RouteFeature> {
    const query = `from=${from.lat},${from.lon}&to=${to.lat},${to.lon}&sq=${sq}`;
    const resp = await this.fetchFn(`${this.baseUrl}/api/route?${query}`, { signal });
    if (!resp.ok) throw await errorOf(resp);
    return (await resp.json()) as RouteFeature;
  }

  async health(): Promise<Health> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/health`);
    if (!resp.ok) throw await errorOf(resp);
    return (await resp.json()) as Health;
  }
}
