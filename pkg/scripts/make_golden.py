"""Regenerate the golden DAG fixture under tests/data.

The expected ordering and state roots come from the slow reference code in
tests/oracles.py plus a hand-rolled Merkle fold, not from the package.
"""

import hashlib
import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from oracles import brute_apply, naive_order_dag, naive_order_full, name_id  # noqa: E402

EDGES = {
    "Genesis": [], "A": ["Genesis"], "B": ["A"], "C": ["A"], "D": ["B", "C"],
    "E": ["C"], "F": ["E", "D"], "H": ["B"],
}
alice, bob, carol, dave = (name_id(n) for n in ("alice", "bob", "carol", "dave"))
GENESIS_STATE = {alice: 100, bob: 50}
MIN_RECEIVE = {dave: 5}


def tx(inputs, outputs, sigs):
    return {"inputs": [[a.hex(), v] for a, v in inputs],
            "outputs": [[a.hex(), v] for a, v in outputs],
            "signatures": sorted(s.hex() for s in sigs)}


TXS = {
    "A": [tx([(alice, 100)], [(alice, 70), (carol, 30)], [alice])],
    "C": [tx([(bob, 50), (alice, 100)], [(bob, 40), (alice, 110)], [bob])],  # stale if A came first
    "D": [tx([(bob, 50), (carol, 30)], [(bob, 52), (carol, 28)], [carol])],
    "E": [tx([(carol, 30), (bob, 50)], [(carol, 27), (bob, 53)], [carol])],
    "H": [tx([(alice, 70), (carol, 30)], [(alice, 60), (carol, 40)], [alice])],
    "F": [tx([(alice, 70)], [(alice, 68), (dave, 2)], [alice]),      # below dave's floor
          tx([(alice, 70), (bob, 50)], [(alice, 69), (bob, 51)], [alice])],
}


class _Tx:  # the shape brute_apply expects
    def __init__(self, d):
        self.inputs = [(bytes.fromhex(a), v) for a, v in d["inputs"]]
        self.outputs = [(bytes.fromhex(a), v) for a, v in d["outputs"]]
        self.signatures = {bytes.fromhex(s) for s in d["signatures"]}


def root(bal, minr):
    sha = lambda b: hashlib.sha256(b).digest()
    accts = sorted(set(bal) | set(minr))
    level = [sha(a + bal.get(a, 0).to_bytes(8, "big") + minr.get(a, 0).to_bytes(8, "big"))
             for a in accts]
    if not level:
        return sha(b"")
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [sha(level[k] + level[k + 1]) for k in range(0, len(level), 2)]
    return level[0]


def main():
    ids = {n: name_id(n) for n in EDGES}
    name = {v: k for k, v in ids.items()}
    pm = {ids[n]: tuple(ids[p] for p in ps) for n, ps in EDGES.items()}
    doc = {
        "genesis_state": {
            "balances": {a.hex(): v for a, v in sorted(GENESIS_STATE.items())},
            "min_receive": {a.hex(): v for a, v in sorted(MIN_RECEIVE.items())},
        },
        "blocks": [{"id": ids[n].hex(), "parents": [ids[p].hex() for p in ps], "nonce": k,
                    "transactions": TXS.get(n, [])} for k, (n, ps) in enumerate(EDGES.items())],
    }
    out = ROOT / "tests" / "data"
    out.mkdir(exist_ok=True)
    (out / "example.json").write_text(json.dumps(doc, indent=1) + "\n")
    (out / "example.order").write_text("".join(b.hex() + "\n" for b in naive_order_full(pm)))

    roots = {}
    for n in EDGES:
        bal, minr = dict(GENESIS_STATE), dict(MIN_RECEIVE)
        for b in naive_order_dag(pm, ids[n]):
            for t in TXS.get(name[b], []):
                bal, _ = brute_apply(bal, minr, _Tx(t), True)
        roots[ids[n].hex()] = root(bal, {a: v for a, v in minr.items() if v}).hex()
    (out / "example.roots.json").write_text(json.dumps(roots, indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
