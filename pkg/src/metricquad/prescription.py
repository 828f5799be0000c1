"""Singularity prescriptions and the integer curvature budget.

A prescription assigns an integer index k to selected vertices; the target
cone curvature there is k*pi/2, so a valid prescription must satisfy
sum(k) == 4*chi exactly in integer arithmetic. Interior target valence is
4 - k, boundary target valence is 2 - k; both must stay >= 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import UnknownVertex
from .mesh import TriangleMesh


@dataclass
class SingularityPrescription:
    """Mapping vertex id -> integer index, kept in insertion-sorted order."""

    entries: dict

    def __init__(self, entries=None):
        items = {}
        if entries:
            if isinstance(entries, dict):
                pairs = entries.items()
            else:
                pairs = entries
            for v, k in pairs:
                items[int(v)] = int(k)
        self.entries = dict(sorted(items.items()))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries.items())

    def index_of(self, v):
        return self.entries.get(int(v), 0)

    @property
    def vertices(self):
        return list(self.entries.keys())

    def total_index(self):
        return sum(self.entries.values())

    def to_json(self) -> str:
        rows = [{"vertex": v, "index": k} for v, k in self.entries.items()]
        return json.dumps(rows, separators=(", ", ": "))

    @classmethod
    def from_json(cls, text):
        data = json.loads(text) if isinstance(text, (str, bytes)) else text
        return cls((row["vertex"], row["index"]) for row in data)


@dataclass
class PrescriptionVerdict:
    ok: bool
    total_index: int
    required_index: int
    messages: list

    @property
    def residual(self):
        """Budget gap in units of pi/2."""
        return self.total_index - self.required_index

    def to_dict(self):
        return {
            "ok": self.ok,
            "totalIndex": self.total_index,
            "requiredIndex": self.required_index,
            "residualPiHalf": self.residual,
            "messages": list(self.messages),
        }


def validate_prescription(mesh: TriangleMesh,
                          prescription: SingularityPrescription) -> PrescriptionVerdict:
    """Check the integer budget sum(k) == 4*chi and per-vertex sanity.

    Raises UnknownVertex for out-of-range ids; all other problems are
    reported in the verdict so a UI can show them while editing.
    """
    msgs = []
    for v, k in prescription:
        if v < 0 or v >= mesh.n_vertices:
            raise UnknownVertex(f"prescribed vertex {v} outside 0..{mesh.n_vertices - 1}")
        if k == 0:
            msgs.append(f"vertex {v}: index 0 is not a singularity")
        limit = 1 if mesh.is_boundary_vertex[v] else 3
        if k > limit:
            kind = "boundary" if mesh.is_boundary_vertex[v] else "interior"
            msgs.append(f"vertex {v}: {kind} index {k} gives target valence < 1")
    total = prescription.total_index()
    required = 4 * mesh.euler_characteristic
    if total != required:
        msgs.append(f"index sum {total} != 4*chi = {required}")
    return PrescriptionVerdict(
        ok=not msgs,
        total_index=total,
        required_index=required,
        messages=msgs,
    )
