"""Single entry point wiring all pipeline stages.

Exit codes: 0 success, 1 domain error (message on stderr), 2 usage error.
stdout carries only data artifacts; every log line goes to stderr.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .cloud_preproc import preprocess_ride, read_bumpiness_csv, write_bumpiness_csv
from .edge_preproc import downsample_ride
from .errors import VeloqualError
from .export import to_geojson
from .params import PipelineParams, load_params, save_params
from .quality import aggregate, load_grid, quantize_ride, save_grid
from .ride_io import parse_ride, write_ride
from .routing import RouteRequest, load_graph, route_geojson, shortest_route

logger = logging.getLogger("veloqual")


def _params_from(args) -> PipelineParams:
    if getattr(args, "params", None):
        return load_params(args.params)
    return PipelineParams()


def _read_ride(path: str):
    with open(path, "rb") as fh:
        return parse_ride(fh.read())


def cmd_downsample(args) -> int:
    ride = _read_ride(args.input)
    out = downsample_ride(ride, _params_from(args))
    Path(args.output).write_bytes(write_ride(out))
    logger.info("downsampled %s: %d -> %d motion samples", ride.ride_id, len(ride.motion), len(out.motion))
    return 0


def cmd_preprocess(args) -> int:
    ride = _read_ride(args.input)
    series = preprocess_ride(ride, _params_from(args))
    text = write_bumpiness_csv(series)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    logger.info("ride %s: %d bumpiness points", ride.ride_id, len(series.points))
    return 0


def _parse_when(raw: str) -> int:
    """Epoch milliseconds from either an integer or an ISO date/datetime."""
    try:
        return int(raw)
    except ValueError:
        pass
    parsed = _dt.datetime.fromisoformat(raw)
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=_dt.timezone.utc)
    return int(parsed.timestamp() * 1000)


def _load_series(path: str):
    text = Path(path).read_text(encoding="utf-8")
    return read_bumpiness_csv(text, fallback_ride_id=Path(path).stem)


def _quantize_file(task):
    path, params = task
    series = _load_series(path)
    if not series.points:
        return None
    return quantize_ride(series, params)


def cmd_aggregate(args) -> int:
    params = _params_from(args)
    after = _parse_when(args.after) if args.after else None
    before = _parse_when(args.before) if args.before else None

    paths = []
    for path in args.files:
        if after is not None or before is not None:
            series = _load_series(path)
            if not series.points:
                continue
            start = series.points[0].timestamp
            if after is not None and start < after:
                continue
            if before is not None and start > before:
                continue
        paths.append(path)

    if args.jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            quantized = [q for q in pool.map(_quantize_file, [(p, params) for p in paths]) if q]
    else:
        quantized = [q for q in map(_quantize_file, [(p, params) for p in paths]) if q]

    grid = aggregate(quantized, params)
    save_grid(grid, args.out)
    logger.info(
        "aggregated %d rides into %d cells (%d samples skipped)",
        len(quantized),
        len(grid.cells),
        grid.skipped_samples,
    )
    return 0


def cmd_export(args) -> int:
    grid = load_grid(args.grid)
    bbox = None
    if args.bbox:
        parts = [float(p) for p in args.bbox.split(",")]
        if len(parts) != 4:
            raise VeloqualError("--bbox needs minLon,minLat,maxLon,maxLat")
        bbox = tuple(parts)
    text = to_geojson(grid, bbox)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")
    return 0


def _parse_latlon(raw: str):
    lat_str, _, lon_str = raw.partition(",")
    return (float(lat_str), float(lon_str))


def cmd_route(args) -> int:
    graph = load_graph(args.graph)
    grid = load_grid(args.grid)
    req = RouteRequest(_parse_latlon(args.from_), _parse_latlon(args.to), args.sq)
    result = shortest_route(graph, grid, req)
    sys.stdout.write(route_geojson(result) + "\n")
    return 0


def cmd_synth(args) -> int:
    from .synth import experiment_rides, load_world, params_for_world

    world = load_world(args.world)
    seed = args.seed if args.seed is not None else world.seed
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = params_for_world(world, _params_from(args))
    save_params(params, out_dir / "params.json")
    count = 0
    for ride in experiment_rides(world, args.rides, seed):
        (out_dir / f"{ride.ride_id}.ride").write_bytes(write_ride(ride))
        count += 1
    logger.info("wrote %d rides and params.json to %s", count, out_dir)
    return 0


def cmd_report(args) -> int:
    from .report import render_report

    grid = load_grid(args.grid)
    for path in render_report(grid, args.out, top=args.top):
        logger.info("wrote %s", path)
    return 0


def cmd_serve(args) -> int:
    from .service import load_config, serve

    config = load_config(args.config)
    serve(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="veloqual",
        description="Crowdsensed bicycle surface quality pipeline",
    )
    parser.add_argument("--version", action="version", version=f"veloqual {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("downsample", help="apply the on-phone reduction to a raw ride file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--params")
    p.set_defaults(func=cmd_downsample)

    p = sub.add_parser("preprocess", help="trim, remove stops and emit the bumpiness CSV")
    p.add_argument("input")
    p.add_argument("--params")
    p.add_argument("--out", help="output CSV path (default stdout)")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("aggregate", help="fold bumpiness CSVs into a grid snapshot")
    p.add_argument("files", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--params")
    p.add_argument("--after", help="keep rides starting at/after this time (epoch ms or ISO date)")
    p.add_argument("--before", help="keep rides starting at/before this time (epoch ms or ISO date)")
    p.add_argument("--jobs", type=int, default=1, help="parallel ride quantization")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("export", help="write the grid as GeoJSON polygons")
    p.add_argument("--grid", required=True)
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--bbox", help="minLon,minLat,maxLon,maxLat filter")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("route", help="surface-quality-aware route as GeoJSON on stdout")
    p.add_argument("--graph", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--from", dest="from_", required=True, metavar="LAT,LON")
    p.add_argument("--to", required=True, metavar="LAT,LON")
    p.add_argument("--sq", type=int, default=0, help="surface quality slider 0..10")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("synth", help="generate a synthetic ride crowd into a directory")
    p.add_argument("--world", required=True)
    p.add_argument("--rides", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--params")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="render per-cell CSV and overview figures")
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--top", type=int, default=12, help="cells in the distribution panel")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except VeloqualError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
