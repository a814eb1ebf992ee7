"""Batch scenario runner.

    freemembrane <subcommand> --config cfg.yaml --out results/ [--elements N] [--plot]

Each run writes one CSV (plus two ``.s2p`` files for ``rf``) and a manifest
``<subcommand>_manifest.json`` echoing the resolved config and the solver
settings. On failure an ``error.json`` record is written to the output
directory (when it is usable) and to stderr.

Exit codes: 0 success, 1 usage or config error, 2 solver error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig, load_config
from .device import EXTERNAL, INTERNAL
from .errors import ConfigError, FreeMembraneError, IoFailure
from .rf import SwitchCircuit, export_touchstone, fit_lumped, shunt_sparams
from .solver import find_pullin, find_pullout, make_model, sweep_ratio, trace_cv_curve
from .stiction import (
    ARCHETYPES,
    AdhesionModel,
    BeamArchetype,
    archetype_restoring_force,
    min_pressure_to_contact,
    stuck_state,
    unstick_voltage,
)
from .tables import ResultTable, emit_csv

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3

SUBCOMMANDS = ("pullin", "pullout", "cv-curve", "ratio-sweep", "unstick", "table1", "rf", "fit-rf")
_NAN = float("nan")


def _electrodes(name: str) -> str:
    if name not in (INTERNAL, EXTERNAL):
        raise ConfigError(f"electrodes must be {INTERNAL!r} or {EXTERNAL!r}, got {name!r}", key="electrodes")
    return name


# ---------------------------------------------------------------------------
# scenarios: each returns (table, extra files {name: writer})
# ---------------------------------------------------------------------------

def _pullin(cfg: ScenarioConfig):
    blk = cfg.block("pullin")
    pi = find_pullin(cfg.device, _electrodes(blk["electrodes"]), float(blk["v_max"]), cfg.solver)
    on, col = pi.onset.deflection, pi.collapsed.deflection
    table = ResultTable(
        ["v_pullin_V", "bracket_lo_V", "bracket_hi_V", "onset_peak_m", "onset_max_upward_m",
         "collapsed_peak_m", "collapsed_max_upward_m", "collapsed_on_dielectric"],
        [[pi.v_pullin, pi.bracket[0], pi.bracket[1], on.peak(), float(np.max(on.w)),
          col.peak(), float(np.max(col.w)), pi.collapsed.collapsed]],
    )
    return table, {}


def _pullout(cfg: ScenarioConfig):
    blk = cfg.block("pullout")
    v_start = blk["v_start"]
    po = find_pullout(cfg.device, _electrodes(blk["electrodes"]), cfg.solver,
                      v_start=None if v_start is None else float(v_start), adhesion=float(blk["adhesion"]))
    table = ResultTable(["v_pullout_V", "bracket_lo_V", "bracket_hi_V"],
                        [[po.v_pullout, po.bracket[0], po.bracket[1]]])
    return table, {}


def _cv_grid(cfg: ScenarioConfig, kind: str) -> list[float]:
    blk = cfg.block("cv_curve")
    if blk["voltages"] is not None:
        return [float(v) for v in blk["voltages"]]
    v_max = blk["v_max"]
    if v_max is None:
        # up to 1.5 V_pi with some margin, the range of the plateau check
        v_max = 1.6 * find_pullin(cfg.device, kind, 40.0, cfg.solver).v_pullin
    n = int(blk["n_points"])
    if n < 2:
        raise ConfigError("cv_curve.n_points must be >= 2", key="cv_curve.n_points")
    return [float(v) for v in np.linspace(float(blk["v_min"]), float(v_max), n)]


def _cv_curve(cfg: ScenarioConfig):
    kind = _electrodes(cfg.block("cv_curve")["electrodes"])
    grid = _cv_grid(cfg, kind)
    model = make_model(cfg.device, cfg.solver)
    results: list = []
    pts = trace_cv_curve(None, kind, grid, cfg.solver, model=model, results=results)
    rows = []
    for p, r in zip(pts, results):
        w = r.deflection.w
        rows.append([p.voltage, p.peak_displacement, float(np.max(w)), float(w[model.mesh.center_node]),
                     p.contact_fraction, r.collapsed])
    table = ResultTable(["voltage_V", "peak_displacement_m", "max_upward_m", "center_displacement_m",
                         "contact_fraction", "collapsed"], rows)
    return table, {}


def _ratio_sweep(cfg: ScenarioConfig):
    blk = cfg.block("ratio_sweep")
    rows = sweep_ratio(cfg.device, [float(r) for r in blk["ratios"]], cfg.solver, v_max=float(blk["v_max"]))
    table = ResultTable(["ratio", "v_pullin_V", "peak_displacement_m", "error"],
                        [[r.ratio, r.v_pullin, r.peak_displacement, r.error] for r in rows])
    return table, {}


def _unstick(cfg: ScenarioConfig):
    blk = cfg.block("unstick")
    adhesion = AdhesionModel(float(blk["adhesion"]))
    model = make_model(cfg.device, cfg.solver)
    rows = []
    for vc in blk["v_charge"]:
        vc = float(vc)
        try:
            st = stuck_state(None, vc, adhesion, cfg.solver, model=model)
            if not st.stuck:
                rows.append([vc, False, 0.0, _NAN, ""])
                continue
            margin = min(st.margins.values())
            v_un = unstick_voltage(None, st, float(blk["v_ext_max"]), cfg.solver, model=model)
            rows.append([vc, True, v_un, margin, ""])
        except FreeMembraneError as exc:
            log.warning("unstick failed at %s V charge: %s", vc, exc)
            rows.append([vc, True, _NAN, _NAN, exc.code])
    table = ResultTable(["v_charge_V", "stuck", "unstick_V", "min_margin_N", "error"], rows)
    return table, {}


def _table1(cfg: ScenarioConfig):
    gap = cfg.block("table1")["gap"]
    gap = None if gap is None else float(gap)
    rows = []
    for kind in ARCHETYPES:
        arch = BeamArchetype(kind, cfg.device)
        try:
            p = min_pressure_to_contact(arch, gap, cfg.solver)
            f = archetype_restoring_force(replace(arch, device=arch.spec(gap)), settings=cfg.solver)
            rows.append([kind, p, f, ""])
        except FreeMembraneError as exc:
            rows.append([kind, _NAN, _NAN, exc.code])
    return ResultTable(["archetype", "min_pressure_Pa", "restoring_force_N", "error"], rows), {}


def _target(blk: dict) -> tuple:
    return (float(blk["isolation_db"]), float(blk["isolation_hz"])), \
           (float(blk["insertion_db"]), float(blk["insertion_hz"]))


def _rf(cfg: ScenarioConfig):
    blk = cfg.block("rf")
    z0 = float(blk["z0"])
    if blk["circuit"]:
        c = blk["circuit"]
        try:
            circuit = SwitchCircuit(float(c["r_down"]), float(c["c_up"]), float(c.get("l_down", 0.0)), z0)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid rf.circuit: {exc}", key="rf.circuit") from exc
    else:
        circuit = fit_lumped(*_target(blk["targets"]), z0=z0)
    n = int(blk["n_points"])
    freqs = np.linspace(float(blk["f_min"]), float(blk["f_max"]), n)
    up = shunt_sparams(circuit, "up", freqs)
    down = shunt_sparams(circuit, "down", freqs)
    rows = [[f, a, b, c, d] for f, a, b, c, d in
            zip(freqs, up.s21_db(), up.s11_db(), down.s21_db(), down.s11_db())]
    table = ResultTable(["freq_Hz", "s21_up_dB", "s11_up_dB", "s21_down_dB", "s11_down_dB"], rows)
    extra = {"rf_up.s2p": lambda p: export_touchstone(up, p),
             "rf_down.s2p": lambda p: export_touchstone(down, p)}
    return table, extra


def _fit_rf(cfg: ScenarioConfig):
    blk = cfg.block("fit_rf")
    (iso, f_iso), (il, f_il) = _target(blk)
    circuit = fit_lumped((iso, f_iso), (il, f_il), z0=float(blk["z0"]))
    iso_chk = float(shunt_sparams(circuit, "down", [f_iso]).s21_db()[0])
    il_chk = float(shunt_sparams(circuit, "up", [f_il]).s21_db()[0])
    table = ResultTable(["r_down_ohm", "c_up_F", "isolation_check_dB", "insertion_check_dB"],
                        [[circuit.r_down, circuit.c_up, iso_chk, il_chk]])
    return table, {}


SCENARIOS = {
    "pullin": _pullin, "pullout": _pullout, "cv-curve": _cv_curve, "ratio-sweep": _ratio_sweep,
    "unstick": _unstick, "table1": _table1, "rf": _rf, "fit-rf": _fit_rf,
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _write_json(path: Path, data: dict):
    try:
        path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}", path=str(path)) from exc


def _prepare_out(out: Path):
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create output directory {out}: {exc}", path=str(out)) from exc
    if not out.is_dir():
        raise IoFailure(f"{out} is not a directory", path=str(out))


def run(subcommand: str, config_path, output_dir, n_elements: int | None = None, plot: bool = False) -> int:
    """Run one scenario and return the exit status."""
    out = Path(output_dir)
    try:
        if subcommand not in SCENARIOS:
            raise ConfigError(f"unknown subcommand {subcommand!r}", subcommand=subcommand)
        _prepare_out(out)
        cfg = load_config(config_path, n_elements)
        table, extra = SCENARIOS[subcommand](cfg)
        stem = subcommand.replace("-", "_")
        csv_path = emit_csv(table, out / f"{stem}.csv")
        written = [csv_path]
        for name, writer in extra.items():
            written.append(writer(out / name))
        if plot:
            from .plotting import plot_table
            written.append(plot_table(subcommand, table, out / f"{stem}.png"))
        manifest = {
            "tool": "freemembrane",
            "version": __version__,
            "subcommand": subcommand,
            "config_source": cfg.source,
            "config_sha256": cfg.digest,
            "resolved_config": cfg.resolved,
            "solver": asdict(cfg.solver),
            "outputs": {p.name: _sha256(p) for p in written},
        }
        _write_json(out / f"{stem}_manifest.json", manifest)
        return EXIT_OK
    except FreeMembraneError as exc:
        status = EXIT_USAGE if isinstance(exc, ConfigError) else EXIT_IO if isinstance(exc, IoFailure) else EXIT_SOLVER
        _report(exc.record(), status, out)
        return status


def _report(record: dict, status: int, out: Path):
    record = {**record, "exit_status": status}
    print(json.dumps(_jsonable(record), sort_keys=True), file=sys.stderr)
    try:
        if out.is_dir():
            (out / "error.json").write_text(json.dumps(_jsonable(record), indent=2, sort_keys=True) + "\n")
    except OSError:
        pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(json.dumps({"error": "UsageError", "message": message, "exit_status": EXIT_USAGE}), file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="freemembrane", description="Free-free membrane RF-MEMS switch scenarios")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", type=Path, default=None, help="YAML scenario file (defaults when omitted)")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--elements", type=int, default=None, help="number of beam elements")
    p.add_argument("--plot", action="store_true", help="also render a PNG figure next to the CSV")
    p.add_argument("--seedless", action="store_true",
                   help="accepted for compatibility; runs are deterministic by construction")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.elements is not None and args.elements < 1:
        print(json.dumps({"error": "UsageError", "message": "--elements must be >= 1",
                          "exit_status": EXIT_USAGE}), file=sys.stderr)
        return EXIT_USAGE
    return run(args.subcommand, args.config, args.out, args.elements, args.plot)


if __name__ == "__main__":
    sys.exit(main())
