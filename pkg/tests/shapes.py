"""Regions and hypersurfaces shared by the test modules."""
from sgmaps.polynomial import MultiPoly
from sgmaps.region import Region


BOX2 = ((-1.1, -1.1), (1.1, 1.1))


def xs(n):
    return [MultiPoly.variable(i, n) for i in range(n)]


def circle(cx, cy, r):
    """Positive inside the circle."""
    x, y = xs(2)
    return r * r - (x - cx) ** 2 - (y - cy) ** 2


def disk():
    return Region(2, (circle(0, 0, 1),), *BOX2)


def annulus():
    x, y = xs(2)
    return Region(2, (x * x + y * y - 0.25, 1 - x * x - y * y), *BOX2)


def swapped_annulus():
    x, y = xs(2)
    return Region(2, (0.25 - x * x - y * y, x * x + y * y - 1), *BOX2)


def two_holed_disk():
    return Region(2, (circle(0, 0, 1), -circle(0.45, 0, 0.2), -circle(-0.45, 0, 0.2)), *BOX2)


def overlapping_circles():
    return Region(2, (circle(0.5, 0, 1), circle(-0.5, 0, 1)), (-2.2, -2.2), (2.2, 2.2))


def duplicated_disk():
    return Region(2, (circle(0, 0, 1), circle(0, 0, 1)), *BOX2)


def two_disks(c0, c1, r=0.3):
    """Disjoint union of two disks as the non-negativity set of one polynomial."""
    return Region(2, (-(circle(*c0, r) * circle(*c1, r)),), *BOX2)


def interval():
    (x,) = xs(1)
    return Region(1, (1 - x * x,), (-1.1,), (1.1,))


def two_intervals():
    (x,) = xs(1)
    return Region(1, (x * x - 1, 4 - x * x), (-2.2,), (2.2,))
