import csv
import hashlib
import io
import json
import logging
import os
import tempfile
import time
from typing import Any, Dict, List, Optional, Sequence

import mpmath
from mpmath import mp, mpc, mpf

from app.models.state import InterArrivalLaw, PrecisionPolicy, RenewalTable, ZeroSet
from app.utils.errors import ConfigError

logger = logging.getLogger(__name__)

TABLE_MAGIC = "PINNING-RENEWAL-TABLE 1"
ZEROS_MAGIC = "PINNING-ZERO-SET 1"


def atomic_write_bytes(path: str, data: bytes) -> str:
    """Write data to path through a temp file in the same directory and os.replace."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except Exception as e:
        logger.error(f"Failed to write {path}: {e}")
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def atomic_write_text(path: str, text: str) -> str:
    return atomic_write_bytes(path, text.encode("utf-8"))


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, indent=2)


def write_json(path: str, data: Dict[str, Any], meta: Optional[Dict[str, Any]] = None) -> str:
    """Deterministic JSON; wall-clock content goes in the meta block only."""
    payload = dict(data)
    if meta is not None:
        payload["meta"] = meta
    return atomic_write_text(path, canonical_json(payload) + "\n")


def cache_key(law: InterArrivalLaw, N: int, bits: int) -> str:
    """SHA-256 of the canonical JSON of (law descriptor, N, precision bits)."""
    blob = json.dumps({"law": law.descriptor(), "N": N, "bits": bits}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _encode(x: mpf) -> str:
    man, exp = mpf(x).man_exp
    return f"{man:x} {exp}"


def _decode(man_hex: str, exp: str) -> mpf:
    return mpf((int(man_hex, 16), int(exp)))


def save_table(table: RenewalTable, path: str) -> str:
    """Binary table export: magic line, JSON header, then `j n mantissa_hex exponent` rows."""
    header = {"law": table.law.to_dict(), "N": table.N, "precision_bits": table.precision_bits,
              "underflow_count": table.underflow_count}
    lines = [TABLE_MAGIC, json.dumps(header, sort_keys=True)]
    for j, row in enumerate(table.rows, start=1):
        for offset, value in enumerate(row):
            lines.append(f"{j} {j + offset} {_encode(value)}")
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))
    logger.info(f"Saved renewal table N={table.N} to {path}")
    return path


def load_table(path: str) -> RenewalTable:
    with open(path, "rb") as f:
        lines = f.read().decode("ascii").splitlines()
    if not lines or lines[0] != TABLE_MAGIC:
        raise ConfigError(f"{path} is not a renewal table file")
    header = json.loads(lines[1])
    N = header["N"]
    rows: List[List[mpf]] = [[] for _ in range(N)]
    with mp.workprec(header["precision_bits"]):
        for line in lines[2:]:
            j, n, man_hex, exp = line.split()
            rows[int(j) - 1].append(_decode(man_hex, exp))
    return RenewalTable(N=N, law=InterArrivalLaw(**header["law"]), precision_bits=header["precision_bits"],
                        rows=rows, underflow_count=header.get("underflow_count", 0))


def save_zero_set(zs: ZeroSet, path: str, meta: Optional[Dict[str, Any]] = None) -> str:
    """JSON zero set plus a `.mp` sidecar with exact mantissa/exponent pairs."""
    write_json(path, zs.to_dict(), meta=meta)
    lines = [ZEROS_MAGIC, json.dumps({"N": zs.N, "precision_bits": zs.precision_bits})]
    for index, z in enumerate(zs.zeros):
        lines.append(f"{index} {_encode(z.real)} {_encode(z.imag)}")
    atomic_write_bytes(path + ".mp", ("\n".join(lines) + "\n").encode("ascii"))
    return path


def load_zero_set(path: str) -> ZeroSet:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    sidecar = path + ".mp"
    if os.path.exists(sidecar):
        with open(sidecar, "rb") as f:
            lines = f.read().decode("ascii").splitlines()
        if lines[0] != ZEROS_MAGIC:
            raise ConfigError(f"{sidecar} is not a zero-set sidecar")
        with mp.workprec(data["precision_bits"]):
            zeros = []
            for line in lines[2:]:
                _, re_man, re_exp, im_man, im_exp = line.split()
                zeros.append(mpc(_decode(re_man, re_exp), _decode(im_man, im_exp)))
    else:
        logger.warning(f"No sidecar for {path}; zeros reload at double precision")
        zeros = [mpc(z["re"], z["im"]) for z in data["zeros"]]
    return ZeroSet(
        N=data["N"],
        law=InterArrivalLaw(**data["law"]),
        precision_bits=data["precision_bits"],
        zeros=zeros,
        residuals=[z["residual"] for z in data["zeros"]],
        radii=data.get("radii", []),
        converged=data["converged"],
        iterations=data.get("iterations", 0),
        flags=data.get("flags", []),
    )


def write_csv(path: str, fieldnames: Sequence[str], rows: Sequence[Dict[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(fieldnames), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in fieldnames})
    return atomic_write_text(path, buffer.getvalue())


def write_curve_csv(path: str, rows: Sequence[Dict[str, Any]]) -> str:
    return write_csv(path, ["theta", "re", "im", "s", "density"], rows)


def write_zero_table_csv(path: str, rows: Sequence[Dict[str, Any]]) -> str:
    return write_csv(path, ["n", "re", "im", "seed_re", "seed_im", "gap"], rows)


class ArtifactStore:
    """Content-addressed cache for renewal tables and zero sets, plus a log of written files."""

    def __init__(self, cache_dir: Optional[str] = None, output_dir: str = "output"):
        self.cache_dir = cache_dir
        self.output_dir = output_dir
        self.history: List[Dict[str, Any]] = []

    def output_path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def record(self, kind: str, path: str, started: Optional[float] = None) -> None:
        entry = {"kind": kind, "path": path, "timestamp": time.time()}
        if started is not None:
            entry["duration"] = time.time() - started
        self.history.append(entry)
        logger.info(f"Wrote {kind}: {path}")

    def written(self, kind: Optional[str] = None) -> List[str]:
        return [e["path"] for e in self.history if kind is None or e["kind"] == kind]

    def _cache_path(self, prefix: str, law: InterArrivalLaw, N: int, bits: int) -> Optional[str]:
        if not self.cache_dir:
            return None
        return os.path.join(self.cache_dir, f"{prefix}-{cache_key(law, N, bits)}")

    def renewal_table(self, law: InterArrivalLaw, N: int, policy: PrecisionPolicy) -> RenewalTable:
        from app.pinning.renewal import renewal_table

        path = self._cache_path("table", law, N, policy.bits_for(N))
        if path and os.path.exists(path):
            logger.info(f"Renewal table cache hit: {path}")
            return load_table(path)
        table = renewal_table(law, N, policy)
        if path:
            save_table(table, path)
        return table

    def zero_set(self, law: InterArrivalLaw, N: int, policy: PrecisionPolicy,
                 table: Optional[RenewalTable] = None) -> ZeroSet:
        """Zero set of Z_N, from the cache or computed from (a table covering) degree N."""
        from app.pinning.partition import partition_polynomial
        from app.pinning.zeros import find_all_zeros

        if table is None or table.N < N:
            table = self.renewal_table(law, N, policy)
        # the root finder works at the larger of the policy and table precisions
        bits = max(policy.bits_for(N), table.precision_bits)
        path = self._cache_path("zeros", law, N, bits)
        if path and os.path.exists(path + ".json"):
            return load_zero_set(path + ".json")
        zs = find_all_zeros(partition_polynomial(table, N), policy)
        if path:
            save_zero_set(zs, path + ".json")
        return zs

    def get_summary(self) -> Dict[str, Any]:
        kinds: Dict[str, int] = {}
        for entry in self.history:
            kinds[entry["kind"]] = kinds.get(entry["kind"], 0) + 1
        return {"files": len(self.history), "by_kind": kinds}
