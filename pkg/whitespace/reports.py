"""
Report writers. JSON is written with sorted keys and no timestamps so that
identical runs produce byte-identical files.
"""
import csv
import json
import math
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import numpy as np


def to_jsonable(value):
    """Converts numpy scalars/arrays and enums; non-finite floats become None."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def dumps(data: Dict) -> str:
    return json.dumps(to_jsonable(data), sort_keys=True, indent=2) + '\n'


def write_json(data: Dict, path) -> None:
    Path(path).write_text(dumps(data), encoding='utf-8')


def read_json(path) -> Dict:
    return json.loads(Path(path).read_text(encoding='utf-8'))


def write_rows_csv(rows: List[Dict], path, columns: Optional[Iterable[str]] = None) -> None:
    """One row per dict; None is written as an empty cell."""
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow(['' if row.get(c) is None else to_jsonable(row.get(c)) for c in columns])
