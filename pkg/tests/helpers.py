from gustvqa.geoindex import LocationRecord
from gustvqa.qagen import NamedPoint, NamedPoints


def named(image="img.png", **colors):
    """colors: group -> list of (name, kind, parent, (lat, lon))."""
    out = {}
    for color, items in colors.items():
        out[color] = [
            NamedPoint(geo_point=g, pixel_point=(0, 0), location=LocationRecord(n, k, p, "containment"))
            for n, k, p, g in items
        ]
    return NamedPoints(image=image, width=360, height=180, extent=(90.0, -90.0, -180.0, 180.0), colors=out)


def rich(image="img.png"):
    """An image with plenty of red and yellow places."""
    red = [(f"R{i}", "ocean" if i % 2 else "land", "Pacific Ocean" if i % 2 else "Asia", (i * 1.5, i * 2.25)) for i in range(8)]
    yellow = [(f"Y{i}", "land" if i % 2 else "ocean", "Europe" if i % 2 else "Atlantic Ocean", (-i * 1.0, -i * 3.0)) for i in range(8)]
    green = [("G0", "land", "Africa", (0.0, 20.0))]
    return named(image, red=red, yellow=yellow, green=green, white=[])
