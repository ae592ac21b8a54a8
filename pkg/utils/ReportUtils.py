import csv
import json
import math
import struct
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import numpy as np

MATRIX_MAGIC = b"ITESPEC1"
MATRIX_HEADER = struct.Struct("<II")


class ReportUtils:
    """Artifact writers: CSV, JSON, two-column plot data and binary matrices"""

    @staticmethod
    def to_jsonable(value: Any) -> Any:
        """numpy scalars to python, complex to [re, im], non-finite floats to None"""
        if isinstance(value, dict):
            return {str(k): ReportUtils.to_jsonable(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [ReportUtils.to_jsonable(v) for v in value]
        if isinstance(value, np.ndarray):
            return [ReportUtils.to_jsonable(v) for v in value.tolist()]
        if isinstance(value, (bool, np.bool_)):
            return bool(value)
        if isinstance(value, (int, np.integer)):
            return int(value)
        if isinstance(value, (complex, np.complexfloating)):
            return [ReportUtils.to_jsonable(float(value.real)), ReportUtils.to_jsonable(float(value.imag))]
        if isinstance(value, (float, np.floating)):
            value = float(value)
            return value if math.isfinite(value) else None
        return value

    @staticmethod
    def dumps(payload: Any) -> str:
        return json.dumps(ReportUtils.to_jsonable(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"

    @staticmethod
    def write_json(path: Path, payload: Any) -> Path:
        path = Path(path)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(ReportUtils.dumps(payload))
        return path

    @staticmethod
    def format_cell(value: Any) -> str:
        if isinstance(value, (bool, np.bool_)):
            return "true" if value else "false"
        if isinstance(value, (int, np.integer)):
            return str(int(value))
        if isinstance(value, (float, np.floating)):
            return repr(float(value))
        return str(value)

    @staticmethod
    def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = Path(path)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator="\r\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([ReportUtils.format_cell(v) for v in row])
        return path

    @staticmethod
    def read_csv(path: Path) -> List[Dict[str, str]]:
        with open(path, 'r', encoding='utf-8', newline='') as f:
            return list(csv.DictReader(f))

    @staticmethod
    def write_plot_data(path: Path, xs: Sequence[float], ys: Sequence[float]) -> Path:
        """Two whitespace-separated columns, one point per line"""
        path = Path(path)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            for x, y in zip(xs, ys):
                f.write(f"{ReportUtils.format_cell(float(x))} {ReportUtils.format_cell(float(y))}\n")
        return path

    @staticmethod
    def write_matrix(path: Path, matrix: np.ndarray, tag: int) -> Path:
        """16-byte header (magic, u32 size, u32 form tag) then row-major little-endian complex128"""
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"Expected a square matrix, got shape {matrix.shape}")
        path = Path(path)
        with open(path, 'wb') as f:
            f.write(MATRIX_MAGIC)
            f.write(MATRIX_HEADER.pack(matrix.shape[0], tag))
            f.write(np.ascontiguousarray(matrix).astype('<c16').tobytes(order='C'))
        return path

    @staticmethod
    def read_matrix(path: Path) -> Tuple[np.ndarray, int]:
        with open(path, 'rb') as f:
            blob = f.read()
        if blob[:8] != MATRIX_MAGIC:
            raise ValueError(f"{path} is not an itespec matrix dump")
        size, tag = MATRIX_HEADER.unpack(blob[8:16])
        data = np.frombuffer(blob[16:], dtype='<c16')
        if data.size != size * size:
            raise ValueError(f"{path} holds {data.size} entries, expected {size * size}")
        return data.reshape(size, size).astype(complex), tag
