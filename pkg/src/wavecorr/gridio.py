"""File formats: the binary grid container, CSV exports, and run manifests.

The grid container is a single file: an 8-byte magic, a little-endian uint64
header length, a UTF-8 JSON header (shape, dtype, geometry, kind, free-form
metadata) and the raw C-order array bytes. It round-trips GridFunction,
Symbol, medium samples and wave-state checkpoints.
"""

import hashlib
import json
import time
from pathlib import Path

import numpy as np

MAGIC = b"WCGRID01"

__all__ = [
    "save_grid",
    "load_grid",
    "save_gridfunction",
    "load_gridfunction",
    "save_symbol",
    "load_symbol",
    "save_wave_state",
    "load_wave_state",
    "record_to_csv",
    "record_from_csv",
    "curve_to_csv",
    "sha256_file",
    "write_manifest",
]


def save_grid(path, array, meta=None):
    array = np.ascontiguousarray(array)
    header = {
        "shape": list(array.shape),
        "dtype": array.dtype.str,
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint64(len(blob)).tobytes())
        fh.write(blob)
        fh.write(array.tobytes())


def load_grid(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a grid container")
        (hlen,) = np.frombuffer(fh.read(8), dtype=np.uint64)
        header = json.loads(fh.read(int(hlen)).decode())
        data = np.frombuffer(fh.read(), dtype=np.dtype(header["dtype"]))
    return data.reshape(header["shape"]).copy(), header["meta"]


def _ctx_meta(ctx):
    return {"n": ctx.n, "length": ctx.length, "eps": ctx.eps, "dim": ctx.dim}


def _ctx_from_meta(meta):
    from .phase_space import PhaseSpaceContext

    return PhaseSpaceContext(meta["n"], meta["length"], meta["eps"], meta["dim"])


def save_gridfunction(path, u, extra=None):
    save_grid(path, u.values, {"kind": "grid_function", "ctx": _ctx_meta(u.ctx),
                               **(extra or {})})


def load_gridfunction(path):
    from .phase_space import GridFunction

    data, meta = load_grid(path)
    if meta.get("kind") != "grid_function":
        raise ValueError("container does not hold a grid function")
    return GridFunction(_ctx_from_meta(meta["ctx"]), data)


def save_symbol(path, sym, extra=None):
    save_grid(path, sym.values, {"kind": "symbol", "ctx": _ctx_meta(sym.ctx),
                                 **(extra or {})})


def load_symbol(path):
    from .phase_space import Symbol

    data, meta = load_grid(path)
    if meta.get("kind") != "symbol":
        raise ValueError("container does not hold a symbol")
    return Symbol(_ctx_from_meta(meta["ctx"]), data)


def save_wave_state(path, state, dt):
    stacked = np.stack([state.u, state.v_half])
    save_grid(path, stacked, {"kind": "wave_state", "t": state.t, "i": state.i,
                              "dt": dt})


def load_wave_state(path):
    from .wavesim import WaveState

    data, meta = load_grid(path)
    if meta.get("kind") != "wave_state":
        raise ValueError("container does not hold a wave state")
    return WaveState(u=data[0], v_half=data[1], t=meta["t"], i=meta["i"]), meta["dt"]


# ---------------------------------------------------------------------------
# CSV exports (deterministic formatting: %.17g reproduces doubles exactly)

def record_to_csv(path, rec):
    prov = np.full(len(rec.tau), rec.provenance, dtype=object)
    with open(path, "w") as fh:
        fh.write("tau,value,provenance\n")
        for t, v, p in zip(rec.tau, rec.values, prov):
            fh.write(f"{t:.17g},{v:.17g},{p}\n")
    side = Path(str(path) + ".json")
    meta = {
        "pair": _jsonable(rec.pair), "window_t": rec.window_t,
        "ensemble": rec.ensemble, "dt": rec.dt, "provenance": rec.provenance,
        "meta": _jsonable(rec.meta),
    }
    side.write_text(json.dumps(meta, sort_keys=True, indent=1))


def record_from_csv(path):
    from .correlation import CorrelationRecord

    rows = np.genfromtxt(path, delimiter=",", skip_header=1, usecols=(0, 1))
    side = Path(str(path) + ".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    return CorrelationRecord(
        tau=rows[:, 0], values=rows[:, 1],
        provenance=meta.get("provenance", "unknown"),
        pair=tuple(meta["pair"]) if meta.get("pair") else None,
        window_t=meta.get("window_t"), ensemble=meta.get("ensemble", 1),
        dt=meta.get("dt"), meta=meta.get("meta", {}),
    )


def curve_to_csv(path, columns, header):
    cols = [np.asarray(c, dtype=float) for c in columns]
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# manifests

def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir, config, outputs, warnings, passed, started,
                   extra=None):
    """Manifest of one run: config hash, per-file checksums, wall clock."""
    out_dir = Path(out_dir)
    cfg_blob = json.dumps(_jsonable(config), sort_keys=True).encode()
    entries = {}
    for name in sorted(outputs):
        entries[name] = sha256_file(out_dir / name)
    manifest = _jsonable({
        "config_sha256": hashlib.sha256(cfg_blob).hexdigest(),
        "outputs": entries,
        "warnings": list(warnings),
        "passed": passed,
        "wall_clock_s": time.time() - started,
        "code_version": _code_version(),
        "extra": extra or {},
    })
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True,
                                                      indent=1))
    return manifest


def _code_version():
    try:
        from importlib.metadata import version

        return version("wavecorr")
    except Exception:
        return "unknown"
