"""Output writers: spectrum/embedding CSVs, JSON reports, the SVG spectrum plot
and the run manifest."""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence
import json
import logging
import math
import xml.etree.ElementTree as ET

import numpy as np
import pandas as pd
from pydantic import BaseModel

import config
from errors import DataError, UsageError
from fs_utils import atomic_write_text, file_digest
from report_schema import INF_SENTINEL, RunManifest
from graph_core import RNG_NAME
from spectral import Embedding, Spectrum

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
SVG_NS = 'http://www.w3.org/2000/svg'

_WIDTH, _HEIGHT, _MARGIN = 640, 400, 50


def json_float(value: float) -> float | str:
    return INF_SENTINEL if math.isinf(value) else value


def format_spectrum_csv(spec: Spectrum) -> str:
    frame = pd.DataFrame({'index': np.arange(1, spec.m + 1), 'eigenvalue': spec.eigenvalues})
    return frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')


def format_embedding_csv(emb: Embedding) -> str:
    frame = pd.DataFrame(emb.points, columns=[f"x{i}" for i in range(1, emb.k + 1)])
    frame.insert(0, 'vertex', np.arange(emb.n))
    return frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')


def write_spectrum_csv(spec: Spectrum, path: Path) -> Path:
    return atomic_write_text(path, format_spectrum_csv(spec))


def write_embedding_csv(emb: Embedding, path: Path) -> Path:
    return atomic_write_text(path, format_embedding_csv(emb))


def read_spectrum_csv(path: Path) -> np.ndarray:
    frame = pd.read_csv(path)
    if list(frame.columns) != ['index', 'eigenvalue']:
        raise DataError(f"{path}: expected header 'index,eigenvalue'")
    return frame['eigenvalue'].to_numpy(dtype=np.float64)


def dump_json(payload) -> str:
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode='json', by_alias=True)
    return json.dumps(payload, indent=2, allow_nan=False) + '\n'


def write_json(payload, path: Path) -> Path:
    return atomic_write_text(path, dump_json(payload))


def _fmt(value: float) -> str:
    return f"{value:.3f}"


def render_spectrum_svg(eigenvalues: Sequence[float], k: int) -> str:
    """Index-vs-eigenvalue scatter with the (k, k+1) gap shaded."""
    values = np.asarray(eigenvalues, dtype=np.float64)
    m = values.size
    if m == 0:
        raise DataError("cannot plot an empty spectrum")
    if not 1 <= k <= m:
        raise UsageError(f"gap index k={k} outside [1, {m}]")
    plot_w = _WIDTH - 2 * _MARGIN
    plot_h = _HEIGHT - 2 * _MARGIN
    y_top = max(2.0, float(values.max()))

    def sx(index: float) -> float:
        return _MARGIN + (index - 1) / max(m - 1, 1) * plot_w

    def sy(value: float) -> float:
        return _HEIGHT - _MARGIN - value / y_top * plot_h

    svg = ET.Element('svg', {'xmlns': SVG_NS, 'width': str(_WIDTH), 'height': str(_HEIGHT),
                             'viewBox': f"0 0 {_WIDTH} {_HEIGHT}"})
    ET.SubElement(svg, 'title').text = f"Normalized Laplacian spectrum, gap at k={k}"
    ET.SubElement(svg, 'rect', {'x': '0', 'y': '0', 'width': str(_WIDTH),
                                'height': str(_HEIGHT), 'fill': 'white'})
    if k < m:
        low, high = float(values[k - 1]), float(values[k])
        ET.SubElement(svg, 'rect', {
            'class': 'gap', 'data-k': str(k),
            'x': _fmt(sx(k)), 'y': _fmt(sy(high)),
            'width': _fmt(sx(k + 1) - sx(k)), 'height': _fmt(sy(low) - sy(high)),
            'fill': '#f4a261', 'fill-opacity': '0.35', 'stroke': '#e76f51'})
    axes = ET.SubElement(svg, 'g', {'class': 'axes', 'stroke': 'black'})
    ET.SubElement(axes, 'line', {'x1': _fmt(sx(1)), 'y1': _fmt(sy(0)),
                                 'x2': _fmt(sx(m)), 'y2': _fmt(sy(0))})
    ET.SubElement(axes, 'line', {'x1': _fmt(sx(1)), 'y1': _fmt(sy(0)),
                                 'x2': _fmt(sx(1)), 'y2': _fmt(sy(y_top))})
    for tick in (0.0, 0.5, 1.0, 1.5, 2.0):
        label = ET.SubElement(svg, 'text', {'x': _fmt(_MARGIN - 8), 'y': _fmt(sy(tick) + 4),
                                            'text-anchor': 'end', 'font-size': '11'})
        label.text = f"{tick:g}"
    ET.SubElement(svg, 'text', {'x': _fmt(_WIDTH / 2), 'y': _fmt(_HEIGHT - 12),
                                'text-anchor': 'middle', 'font-size': '12'}).text = 'index'
    points = ET.SubElement(svg, 'g', {'class': 'eigenvalues', 'fill': '#264653'})
    for i, value in enumerate(values, start=1):
        ET.SubElement(points, 'circle', {
            'cx': _fmt(sx(i)), 'cy': _fmt(sy(value)), 'r': '3',
            'data-index': str(i), 'data-eigenvalue': repr(float(value))})
    return ET.tostring(svg, encoding='unicode') + '\n'


def emit_spectrum_plot(spec: Spectrum | Sequence[float], k: int, path: Path) -> Path:
    values = spec.eigenvalues if isinstance(spec, Spectrum) else spec
    return atomic_write_text(path, render_spectrum_svg(values, k))


def manifest_path(output: Path) -> Path:
    output = Path(output)
    return output.with_name(output.name + '.manifest.json')


def build_manifest(subcommand: str, argv: Iterable[str], params: Mapping,
                   inputs: Iterable[Path], outputs: Iterable[Path],
                   seed: Optional[int] = None) -> RunManifest:
    return RunManifest(
        tool=config.TOOL_NAME,
        tool_version=config.TOOL_VERSION,
        format_versions=dict(config.FORMAT_VERSIONS),
        subcommand=subcommand,
        argv=list(argv),
        params=dict(params),
        seed=seed,
        rng=RNG_NAME if seed is not None else None,
        inputs={str(path): file_digest(path) for path in inputs},
        outputs={str(path): file_digest(path) for path in outputs},
    )


def write_manifest(manifest: RunManifest, primary_output: Path) -> Path:
    return write_json(manifest, manifest_path(primary_output))


def read_manifest(path: Path) -> RunManifest:
    try:
        return RunManifest.model_validate_json(Path(path).read_text(encoding='utf-8'))
    except ValueError as err:
        raise DataError(f"{path}: invalid run manifest: {err}") from err
