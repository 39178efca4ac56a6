"""Command line runner.

    gerw <action> --config exp.toml [--out DIR] [--seed S] [--threads K]

``action`` is one of sequences, moments, classify, simulate, verify,
phase-diagram, or ``run`` to execute the config's own action list.  Exit
status: 0 success, 1 a gating verification failed, 2 invalid config.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from . import moments as mom
from . import regimes as reg
from . import scaling as sc
from . import simulator as sim
from . import verify as ver
from .config import ACTIONS, ConfigError, ExperimentConfig, config_hash, load_config, to_dict

__all__ = ["main", "run", "EXIT_OK", "EXIT_VERIFY", "EXIT_CONFIG"]

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG = 0, 1, 2
FULL_TABLE_ROWS = 100_000


def _atomic(path: Path, write) -> None:
    """Call write(tmp_path) then rename onto path."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_text(path: Path, text: str) -> None:
    def w(tmp):
        with open(tmp, "w") as fh:
            fh.write(text)

    _atomic(path, w)


def _json(obj) -> str:
    return json.dumps(ver._plain(obj), indent=2, sort_keys=True) + "\n"


def _table_rows(cfg: ExperimentConfig):
    """Every n for moderate N, otherwise checkpoints plus a log-spaced grid."""
    if cfg.N <= FULL_TABLE_ROWS:
        return None
    grid = np.unique(np.round(np.logspace(0, math.log10(cfg.N), 200)).astype(np.int64))
    return np.union1d(grid, np.asarray(cfg.checkpoint_list(), dtype=np.int64))


class _Run:
    """Lazily built shared objects for one invocation."""

    def __init__(self, cfg: ExperimentConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.alpha = cfg.alpha_family()
        self.eps = cfg.eps_family()
        self.artifacts = []
        self._table = self._moments = self._report = self._ensemble = None

    @property
    def table(self):
        if self._table is None:
            self._table = sc.build_table(self.alpha, self.eps, self.horizon)
        return self._table

    @property
    def moments(self):
        if self._moments is None:
            self._moments = mom.moment_table(self.alpha, self.eps, self.cfg.q, self.horizon)
        return self._moments

    @property
    def report(self):
        if self._report is None:
            self._report = reg.classify(self.alpha, self.eps, self.cfg.q)
        return self._report

    @property
    def horizon(self) -> int:
        return max(self.cfg.N, self.cfg.verify.lil_horizon or 0)

    def drift_points(self):
        """(n, N_big) for the random-drift test."""
        vs = self.cfg.verify
        n_big = vs.n_big or self.cfg.N
        if n_big > self.cfg.N:
            raise ConfigError("field 'verify.n_big': must not exceed N")
        n = vs.drift_n
        if n is None:
            cands = [c for c in self.cfg.checkpoint_list() if 100 * c <= n_big]
            if not cands:
                raise ConfigError("field 'verify.drift_n': no checkpoint n with 100 n <= n_big; set it explicitly")
            n = cands[-1]
        if n >= n_big:
            raise ConfigError("field 'verify.drift_n': must be below n_big")
        return n, n_big

    def sim_checkpoints(self, with_drift: bool) -> list:
        cps = set(self.cfg.checkpoint_list())
        if with_drift:
            cps.update(self.drift_points())
        return sorted(cps)

    def ensemble(self, with_drift: bool = False):
        cps = self.sim_checkpoints(with_drift)
        if self._ensemble is None or not set(cps) <= set(self._ensemble.checkpoints.tolist()):
            self._ensemble = sim.simulate_ensemble(self.alpha, self.eps, self.cfg.q, self.cfg.N, cps,
                                                   self.cfg.m, self.cfg.seed, thread_budget=self.cfg.threads)
        return self._ensemble

    def emit(self, name: str, write) -> None:
        path = self.out / name
        _atomic(path, write)
        self.artifacts.append(name)


# ---------------------------------------------------------------------------
# actions
# ---------------------------------------------------------------------------


def _sequences(r: _Run) -> int:
    rows = _table_rows(r.cfg)
    r.emit("scaling.csv", lambda p: r.table.to_csv(p, rows=rows))
    return EXIT_OK


def _moments(r: _Run) -> int:
    rows = _table_rows(r.cfg)
    r.emit("moments.csv", lambda p: r.moments.to_csv(p, rows=rows))
    return EXIT_OK


def _classify(r: _Run) -> int:
    d = r.report.to_dict()
    d["families"] = {"alpha": r.alpha.describe(), "eps": r.eps.describe()}
    r.emit("regime.json", lambda p: Path(p).write_text(_json(d)))
    return EXIT_OK


def _simulate(r: _Run) -> int:
    ens = r.ensemble(with_drift=r.report.verification == "drift_fluctuation" and "verify" in r.cfg.actions)
    if r.cfg.ensemble_format in ("csv", "both"):
        r.emit("ensemble.csv", ens.to_csv)
    if r.cfg.ensemble_format in ("bin", "both"):
        r.emit("ensemble.bin", ens.to_binary)
    return EXIT_OK


def _cps_index(cps):
    return np.asarray(cps, dtype=np.int64) - 1


def _build_reports(r: _Run) -> dict:
    cfg, rep, tol = r.cfg, r.report, r.cfg.tolerances
    law, fl = rep.law, rep.fluctuation
    gate = rep.verification
    ens = r.ensemble(with_drift=gate == "drift_fluctuation")
    cps = ens.checkpoints
    i = _cps_index(cps)
    T, M = r.table, r.moments
    md = {"alpha": r.alpha.describe(), "eps": r.eps.describe(), "q": cfg.q}
    out = {}

    if law["kind"] == "Constant":
        if "a.s." in rep.modes:
            out["lln"] = ver.verify_lln(ens, T.r[i], tolerance=tol.lln, metadata=md)
        if "L2" in rep.modes:
            out["l2"] = ver.verify_l2(ens, T.r[i], M.mean[i], M.second[i], tolerance=tol.l2,
                                      moment_tolerance=tol.l2_moment, metadata=md)
    elif law["kind"] == "Normal":
        out["normal_mu"] = ver.verify_clt(ens, 0.0, T.a[i] * np.sqrt(T.w[i]), mean=law["mean"], variance=1.0,
                                          delta=tol.ks_delta, min_m=cfg.verify.min_m, metadata=md)

    partial = None
    if gate == "clt":
        partial = T.w if fl["scaling"] == "a_n*sqrt(w_n)" else T.v
        out["clt"] = ver.verify_clt(ens, M.mean[i], T.a[i] * np.sqrt(partial[i]), variance=fl["variance"],
                                    delta=tol.ks_delta, min_m=cfg.verify.min_m, metadata=md)
        if fl["kind"] == "clt_degenerate":
            n = int(cps[-1])
            out["rate"] = ver.verify_rate(ens, float(T.eps_n[n - 1]), rep.constants["alpha"], rep.constants["rho"],
                                          n=n, tolerance=tol.rate, metadata=md)
    elif gate == "drift_fluctuation":
        n, n_big = r.drift_points()
        which = "z" if fl["scaling"] == "a_n*sqrt(z_n)" else "t"
        out["drift_fluctuation"] = ver.verify_drift_fluctuation(ens, T, M, n, n_big, fl["variance"], which=which,
                                                                delta=tol.ks_delta, min_m=cfg.verify.min_m,
                                                                metadata=md)

    k = cfg.verify.quad_trajectories
    if k and partial is not None:
        arrays = sim.step_arrays(r.alpha, r.eps, cfg.N)
        curves = []
        for j in range(k):
            tr = sim.simulate_trajectory(r.alpha, r.eps, cfg.q, cfg.N, [cfg.N], sim.derive_stream_seed(cfg.seed, j),
                                         record_steps=True, arrays=arrays)
            curves.append(ver.quad_variation_curve(tr, T, cfg.q))
        out["quad_variation"] = ver.verify_quad_variation(curves, fl["variance"] * partial[i], cps,
                                                          tolerance=tol.quad_variation, metadata=md)

    k = cfg.verify.lil_trajectories
    if k and partial is not None:
        out["lil"] = _lil(r, k, partial, fl["lil"], md)
    return out


def _lil(r: _Run, k: int, partial, envelope: float, md) -> ver.TestReport:
    cfg, T, M = r.cfg, r.table, r.moments
    H = r.horizon
    lo = max(H // 10, 3)
    arrays = sim.step_arrays(r.alpha, r.eps, H)
    n = np.arange(lo, H + 1)
    scale = T.a[n - 1] * ver.lil_phi(partial[n - 1])
    stats = []
    for j in range(k):
        tr = sim.simulate_trajectory(r.alpha, r.eps, cfg.q, H, [H], sim.derive_stream_seed(cfg.seed, j),
                                     record_steps=True, arrays=arrays)
        S = tr.path()[lo - 1:]
        stats.append(np.max(np.abs(S - M.mean[n - 1]) / scale))
    tol = cfg.tolerances
    return ver.verify_lil(np.asarray(stats)[:, None], [lo, H], 0.0, 1.0, envelope, delta_lower=tol.lil_lower,
                          delta_upper=tol.lil_upper, min_fraction=tol.lil_fraction, metadata=md)


def _verify(r: _Run) -> int:
    reports = _build_reports(r)
    for name, rep in reports.items():
        r.emit(f"reports/{name}.json", lambda p, rep=rep: Path(p).write_text(rep.to_json() + "\n"))
    r.emit("reports/summary.csv", lambda p: ver.write_summary_csv(list(reports.values()), p))
    failed = [name for name, rep in reports.items() if not rep.advisory and not rep.verdict]
    for name in failed:
        print(f"verification failed: reports/{name}.json", file=sys.stderr)
    return EXIT_VERIFY if failed else EXIT_OK


def _phase(r: _Run) -> int:
    g = r.cfg.phase
    kappas, etas = g.kappa.values(), g.eta.values()
    if not kappas or not etas:
        raise ConfigError("field 'phase': empty grid")
    rows = reg.phase_diagram(g.theta, g.alpha, kappas, etas)
    r.emit("phase.csv", lambda p: reg.write_phase_csv(rows, p))
    return EXIT_OK


_DISPATCH = {
    "sequences": _sequences,
    "moments": _moments,
    "classify": _classify,
    "simulate": _simulate,
    "verify": _verify,
    "phase-diagram": _phase,
}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run(cfg: ExperimentConfig, actions=None, out=None) -> int:
    """Execute ``actions`` (default: the config's list); returns the exit status."""
    actions = list(actions or cfg.actions)
    out = Path(out or cfg.out)
    r = _Run(cfg, out)
    status = EXIT_OK
    for act in actions:
        if act == "phase-diagram" and cfg.phase is None:
            raise ConfigError("field 'phase': required by the phase-diagram action")
        status = max(status, _DISPATCH[act](r))
    manifest = {
        "tool": "gerw",
        "version": __version__,
        "config_hash": config_hash(cfg),
        "config": to_dict(cfg),
        "actions": actions,
        "seeds": {"master_seed": cfg.seed, "stream_seed_rule": "SeedSequence(master_seed, spawn_key=(i,))"},
        "artifacts": {name: _sha256(out / name) for name in r.artifacts},
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "exit_status": status,
    }
    _write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return status


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gerw", description="Generalized elephant random walk experiments.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="action", required=True)
    for name in ("run",) + ACTIONS:
        sp = sub.add_parser(name, help="execute the config's action list" if name == "run" else f"{name} only")
        sp.add_argument("--config", required=True, help="TOML experiment file")
        sp.add_argument("--out", help="output directory (overrides config 'out')")
        sp.add_argument("--seed", type=int, help="master seed override (u64)")
        sp.add_argument("--threads", type=int, help="simulator thread budget")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, threads=args.threads, out=args.out)
        actions = None if args.action == "run" else [args.action]
        return run(cfg, actions)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as err:  # includes precondition errors raised on config-derived input
        print(f"invalid input: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
