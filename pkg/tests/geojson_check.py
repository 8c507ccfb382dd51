"""Independent GeoJSON structural validator used as a test oracle.

Implements the RFC 7946 rules the exporter must satisfy, without importing
anything from the package: member types, position arity and coordinate
ranges, linear-ring closure and minimum length, and counter-clockwise
exterior-ring winding.  Raises AssertionError with a path for any violation.
"""


def _check_position(pos, path):
    assert isinstance(pos, list) and len(pos) in (2, 3), f"{path}: position must be [lon, lat]"
    lon, lat = pos[0], pos[1]
    assert isinstance(lon, (int, float)) and isinstance(lat, (int, float)), f"{path}: non-numeric"
    assert -180.0 <= lon <= 180.0, f"{path}: longitude {lon} out of range"
    assert -90.0 <= lat <= 90.0, f"{path}: latitude {lat} out of range"


def _ring_area(ring):
    area = 0.0
    for (x1, y1), (x2, y2) in zip(
        [(p[0], p[1]) for p in ring], [(p[0], p[1]) for p in ring[1:]]
    ):
        area += x1 * y2 - x2 * y1
    return area / 2.0


def _check_polygon(coords, path):
    assert isinstance(coords, list) and coords, f"{path}: polygon needs >= 1 ring"
    for r, ring in enumerate(coords):
        rpath = f"{path}.ring[{r}]"
        assert isinstance(ring, list) and len(ring) >= 4, f"{rpath}: ring needs >= 4 positions"
        for i, pos in enumerate(ring):
            _check_position(pos, f"{rpath}[{i}]")
        assert ring[0] == ring[-1], f"{rpath}: ring not closed"
        if r == 0:
            assert _ring_area(ring) > 0, f"{rpath}: exterior ring must be counter-clockwise"
        else:
            assert _ring_area(ring) < 0, f"{rpath}: interior ring must be clockwise"


def _check_linestring(coords, path):
    assert isinstance(coords, list) and len(coords) >= 2, f"{path}: needs >= 2 positions"
    for i, pos in enumerate(coords):
        _check_position(pos, f"{path}[{i}]")


def _check_geometry(geom, path):
    assert isinstance(geom, dict), f"{path}: geometry must be an object"
    gtype = geom.get("type")
    coords = geom.get("coordinates")
    if gtype == "Polygon":
        _check_polygon(coords, path)
    elif gtype == "LineString":
        _check_linestring(coords, path)
    elif gtype == "Point":
        _check_position(coords, path)
    else:
        raise AssertionError(f"{path}: unsupported geometry type {gtype!r}")


def check_feature(feature, path="feature"):
    assert feature.get("type") == "Feature", f"{path}: type must be 'Feature'"
    assert "properties" in feature and isinstance(feature["properties"], dict), f"{path}: properties"
    _check_geometry(feature.get("geometry"), f"{path}.geometry")


def check_feature_collection(doc):
    assert isinstance(doc, dict), "document must be an object"
    assert doc.get("type") == "FeatureCollection", "type must be 'FeatureCollection'"
    features = doc.get("features")
    assert isinstance(features, list), "features must be an array"
    for i, feature in enumerate(features):
        check_feature(feature, f"features[{i}]")
    return len(features)
