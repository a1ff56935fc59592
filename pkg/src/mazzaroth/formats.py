"""Reading and writing the on-disk formats.

* DAG files: JSON ``{"genesis_state": {...}, "blocks": [...]}`` with blocks
  in insertion order, hex ids, decimal nonces and the transaction layout
  ``{"inputs": [[hex, int]], "outputs": [[hex, int]], "signatures": [hex]}``.
* Simulation configs: ``key = value`` lines, ``#`` comments.
* Metrics, series and trajectory CSVs.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from pathlib import Path
from typing import Iterable, Optional

from .dag import Block, DagError, DagStore
from .difficulty import CalibrationTable, DifficultyConfig
from .ledger import LedgerState, Transaction
from .simnet import METRICS_HEADER, InvalidConfig, MetricsRow, SimConfig, StepPoint


class FormatError(ValueError):
    pass


# -- DAG files ---------------------------------------------------------------


def _hex32(s: str) -> bytes:
    b = bytes.fromhex(s)
    if len(b) != 32:
        raise FormatError(f"expected 64 hex chars, got {s!r}")
    return b


def tx_to_json(tx: Transaction) -> dict:
    return {
        "inputs": [[a.hex(), v] for a, v in tx.inputs],
        "outputs": [[a.hex(), v] for a, v in tx.outputs],
        "signatures": sorted(a.hex() for a in tx.signatures),
    }


def tx_from_json(d: dict) -> Transaction:
    return Transaction(
        tuple((_hex32(a), int(v)) for a, v in d.get("inputs", [])),
        tuple((_hex32(a), int(v)) for a, v in d.get("outputs", [])),
        frozenset(_hex32(a) for a in d.get("signatures", [])),
    )


def block_to_json(b: Block) -> dict:
    d = {
        "id": b.id.hex(),
        "parents": [p.hex() for p in b.parents],
        "nonce": b.nonce,
        "transactions": [tx_to_json(t) for t in b.transactions],
    }
    if b.target1 is not None:
        d["target1"] = str(b.target1)
    if b.target2 is not None:
        d["target2"] = str(b.target2)
    return d


def block_from_json(d: dict) -> Block:
    t1, t2 = d.get("target1"), d.get("target2")
    return Block(
        _hex32(d["id"]),
        tuple(_hex32(p) for p in d.get("parents", [])),
        nonce=int(d.get("nonce", 0)),
        transactions=tuple(tx_from_json(t) for t in d.get("transactions", [])),
        target1=None if t1 is None else int(t1),
        target2=None if t2 is None else int(t2),
    )


def state_to_json(s: LedgerState) -> dict:
    return {
        "balances": {a.hex(): v for a, v in sorted(s.balances.items())},
        "min_receive": {a.hex(): v for a, v in sorted(s.min_receive.items())},
    }


def state_from_json(d: Optional[dict]) -> LedgerState:
    if not d:
        return LedgerState()
    return LedgerState(
        {_hex32(a): int(v) for a, v in d.get("balances", {}).items()},
        {_hex32(a): int(v) for a, v in d.get("min_receive", {}).items()},
    )


def dumps_dag(store: DagStore, genesis_state: Optional[LedgerState] = None) -> str:
    doc = {}
    if genesis_state is not None:
        doc["genesis_state"] = state_to_json(genesis_state)
    doc["blocks"] = [block_to_json(b) for b in store.blocks()]
    return json.dumps(doc, indent=1) + "\n"


def loads_dag(text: str) -> tuple[DagStore, LedgerState]:
    """Parse a DAG document; blocks must appear parents-first."""
    try:
        doc = json.loads(text)
        blocks = [block_from_json(b) for b in doc["blocks"]]
        gstate = state_from_json(doc.get("genesis_state"))
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"malformed DAG file: {e}") from e
    store = DagStore()
    for k, b in enumerate(blocks):
        try:
            store.add(b)
        except DagError as e:
            raise FormatError(f"block #{k}: {type(e).__name__}: {e}") from e
    return store, gstate


def load_dag(path) -> tuple[DagStore, LedgerState]:
    return loads_dag(Path(path).read_text())


def save_dag(path, store: DagStore, genesis_state: Optional[LedgerState] = None) -> None:
    Path(path).write_text(dumps_dag(store, genesis_state))


# -- simulation config -------------------------------------------------------

_DIFF_KEYS = {"pbpd", "window1", "controller_mode", "initial_target1", "initial_target2"}


def parse_config(text: str) -> dict:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"line {n}: expected key = value")
        k, v = (x.strip() for x in line.split("=", 1))
        out[k] = v
    return out


def _coerce(kind, raw: str):
    if kind in (int, "int"):
        return int(raw)
    if kind in (float, "float"):
        return float(raw)
    return raw


def config_from_dict(d: dict, base: Optional[SimConfig] = None) -> SimConfig:
    """Build a SimConfig from string values, e.g. from :func:`parse_config`.

    ``table`` names a calibration file; difficulty keys build the adaptive
    controller config.
    """
    cfg = base or SimConfig()
    fields = {f.name: f for f in dataclasses.fields(SimConfig)}
    kw = {}
    diff = {}
    for k, v in d.items():
        if k in _DIFF_KEYS:
            diff[k] = v
        elif k == "table":
            kw["table"] = CalibrationTable.loads(Path(v).read_text())
        elif k == "hashrate_weights":
            kw[k] = [float(x) for x in v.split(",")]
        elif k in fields and k != "difficulty":
            default = getattr(SimConfig(), k)
            kind = type(default) if default is not None else str
            try:
                kw[k] = _coerce(kind, v)
            except ValueError as e:
                raise InvalidConfig(f"{k}: {e}") from None
        else:
            raise InvalidConfig(f"unknown config key {k!r}")
    if diff:
        dc = cfg.difficulty or DifficultyConfig()
        dkw = {}
        for k, v in diff.items():
            if k == "controller_mode":
                dkw["mode"] = v
            elif k == "pbpd":
                dkw[k] = float(v)
            else:
                dkw[k] = int(v)
        kw["difficulty"] = dataclasses.replace(dc, **dkw)
    return dataclasses.replace(cfg, **kw)


def load_config(path, base: Optional[SimConfig] = None) -> SimConfig:
    return config_from_dict(parse_config(Path(path).read_text()), base)


# -- CSV ---------------------------------------------------------------------


def _csv(rows: Iterable[Iterable], header: Iterable[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if x is None else repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def metrics_csv(rows: Iterable[MetricsRow]) -> str:
    return _csv((r.as_tuple() for r in rows), METRICS_HEADER)


def read_metrics_csv(text: str) -> list[MetricsRow]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [
        MetricsRow(**{k: (int(r[k]) if k == "blocks" else float(r[k])) for k in METRICS_HEADER})
        for r in rows
    ]


def series_csv(series) -> str:
    return _csv(series, ("block_index", "dis", "agree_gap"))


def trajectory_csv(points: Iterable[StepPoint]) -> str:
    return _csv(
        ((p.block_index, p.bpd_measured, p.target1, p.target2) for p in points),
        ("block_index", "bpd_measured", "target1", "target2"),
    )
