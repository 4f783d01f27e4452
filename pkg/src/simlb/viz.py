"""SVG rendering of object placement: one circle per object, colored by node."""

import colorsys
from pathlib import Path

import numpy as np

from .model import WorkloadSnapshot


def node_color(node: int, node_count: int) -> str:
    """Evenly spaced hues; fixed so renders are reproducible."""
    h = (node / max(node_count, 1)) % 1.0
    r, g, b = colorsys.hls_to_rgb(h, 0.5, 0.65)
    return "#{:02x}{:02x}{:02x}".format(round(r * 255), round(g * 255), round(b * 255))


def render_svg(s: WorkloadSnapshot, spacing: float = 12.0, radius: float = None,
               title: str = None) -> str:
    if s.coords is None:
        raise ValueError("snapshot has no coordinates to draw")
    if s.coord_dims != 2:
        raise ValueError(f"need 2D coordinates, snapshot has {s.coord_dims}")
    if radius is None:
        radius = spacing * 0.4
    xy = s.coords
    lo = xy.min(axis=0) if len(xy) else np.zeros(2)
    hi = xy.max(axis=0) if len(xy) else np.zeros(2)
    # unit step of the coordinate lattice, so PIC tile centers render like grid points
    step = _lattice_step(xy)
    pad = spacing
    width = (hi[0] - lo[0]) / step * spacing + 2 * pad
    height = (hi[1] - lo[1]) / step * spacing + 2 * pad
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1f}" height="{height:.1f}" '
        f'viewBox="0 0 {width:.1f} {height:.1f}">',
    ]
    if title:
        out.append(f"<title>{title}</title>")
    out.append(f'<rect width="{width:.1f}" height="{height:.1f}" fill="white"/>')
    for o in range(s.n_objects):
        x = pad + (xy[o, 0] - lo[0]) / step * spacing
        # first coordinate runs left to right, second bottom to top
        y = height - pad - (xy[o, 1] - lo[1]) / step * spacing
        fill = node_color(int(s.nodes[o]), s.node_count)
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{radius:.2f}" fill="{fill}" '
                   f'data-object="{o}" data-node="{int(s.nodes[o])}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _lattice_step(xy) -> float:
    steps = []
    for d in range(xy.shape[1]):
        u = np.unique(xy[:, d])
        if len(u) > 1:
            steps.append(np.diff(u).min())
    return float(min(steps)) if steps else 1.0


def save_svg(s: WorkloadSnapshot, path, **kwargs) -> None:
    Path(path).write_text(render_svg(s, **kwargs))
