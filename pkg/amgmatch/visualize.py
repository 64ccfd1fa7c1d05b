"""Aggregate maps as SVG, and a console report of experiment rows."""
import logging
import sys
import warnings

import matplotlib
from matplotlib.collections import PatchCollection
from matplotlib.figure import Figure
from matplotlib.patches import Polygon, Rectangle
from amgmatch.meshes import TriMesh
from amgmatch.problems import GridGeometry
from linalg_util.file_util import ensure_parent_dir

logger = logging.getLogger(__name__)

COLORMAP = 'tab20'


def aggregate_color(aggregate_id):
    """Color of an aggregate; a function of its id only."""
    return matplotlib.colormaps[COLORMAP](aggregate_id % 20)


def _grid_patches(geometry, members):
    h = geometry.h
    x, y = geometry.cell_centers()
    return [Rectangle((x[i] - h / 2, y[i] - h / 2), h, h) for i in members]


def _mesh_patches(mesh, members):
    """Dual quads (vertex, edge midpoint, centroid, edge midpoint) of every
    triangle corner at the given free vertices."""
    vertex_of_unknown = mesh.free_vertices
    wanted = set(vertex_of_unknown[members].tolist())
    patches = []
    for triangle in mesh.triangles:
        points = mesh.vertices[triangle]
        centroid = points.mean(axis=0)
        for corner in range(3):
            if triangle[corner] not in wanted:
                continue
            here = points[corner]
            after = 0.5 * (here + points[(corner + 1) % 3])
            before = 0.5 * (here + points[(corner + 2) % 3])
            patches.append(Polygon([here, after, centroid, before],
                                   closed=True))
    return patches


def emit_aggregate_svg(agg, geometry, path, title=None):
    """Draw one colored group of cells per aggregate.

    Args:
        agg: AggregateSet over the unknowns.
        geometry: GridGeometry for finite difference problems, TriMesh for
            finite elements, None when there is nothing to draw.
        path: the SVG file to write.

    Returns:
        True when the file was written, False when it was skipped.
    """
    if geometry is None:
        warnings.warn('no geometry for this problem; skipping %s' % path)
        return False
    if isinstance(geometry, GridGeometry):
        draw, bounds = _grid_patches, ((0.0, 1.0), (0.0, 1.0))
    elif isinstance(geometry, TriMesh):
        draw = _mesh_patches
        bounds = tuple(zip(geometry.vertices.min(axis=0),
                           geometry.vertices.max(axis=0)))
    else:
        raise TypeError('cannot draw aggregates on %r' % (geometry,))

    figure = Figure(figsize=(6, 6))
    axes = figure.add_subplot(1, 1, 1)
    for j, members in enumerate(agg.aggregates):
        group = PatchCollection(draw(geometry, members),
                                facecolor=aggregate_color(j),
                                edgecolor='black', linewidth=0.3)
        group.set_gid('aggregate-%d' % j)
        axes.add_collection(group)
    axes.set_xlim(*bounds[0])
    axes.set_ylim(*bounds[1])
    axes.set_aspect('equal')
    axes.set_axis_off()
    if title:
        axes.set_title(title)

    ensure_parent_dir(path)
    with matplotlib.rc_context({'svg.hashsalt': 'amgmatch'}):
        figure.savefig(path, format='svg', metadata={'Date': None})
    logger.info('wrote %d aggregates to %s', agg.n_aggregates, path)
    return True


def print_report(rows, stream=None):
    """Print report rows as a fixed width table."""
    stream = stream or sys.stdout
    stream.write('%-24s %-10s %6s %7s %-8s %2s %-12s %8s %8s %8s %8s\n' % (
        'name', 'problem', 'n', 'dofs', 'matcher', 'l', 'weight', 'bound',
        'mu_inv', 'rho_f', 'factor'))
    for row in rows:
        if row.error:
            stream.write('%-24s %s\n' % (row.name, row.error))
            continue
        stream.write('%-24s %-10s %6d %7d %-8s %2d %-12s %8s %8.3f %8s %8s\n'
                     % (row.name, row.problem, row.n, row.dofs, row.matcher,
                        row.sweeps, row.weight, row.bound_label, row.mu_inv,
                        _optional(row.rho_f), _optional(row.conv_factor)))


def _optional(value):
    return '-' if value is None else '%.3f' % value
