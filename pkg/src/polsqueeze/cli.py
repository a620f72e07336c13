"""Command line driver for the squeezing pipeline.

Every subcommand reads one flat key=value config, writes one CSV plus a
JSON metadata sidecar, and optionally renders a static figure next to
the CSV with ``--plot``.  Exit codes: 0 success, 2 config problem,
3 solver non-convergence.  Output is deterministic for a given config,
independent of ``--threads``.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .biexciton import bound_energies, diagonalize_sector, pair_kernels, \
    pair_radius, pair_tables
from .config import ConfigError, RunSpec, build_from_spec, default_spec, \
    parse_config, serialize, write_csv
from .fluctuations import parametric_gain, solve_fluctuations
from .grids import log_grid
from .screening import CoulombTable, Heterostructure, epsilon_q
from .spectrum import co_polarized, cross_polarized, squeezing_spectrum
from .steady import ConvergenceError, SingularBlockError, solve_steady
from .sweep import bound_biexciton_energy, default_drive_grid, \
    detuning_drive_map, gain_breakdown_scan, optimize_cell, \
    polariton_energies, power_scan
from .wannier import solve_exciton

_VALLEYS = ("K", "K'")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for line in exc.problems:
            print(f"config error: {line}", file=sys.stderr)
        return 2
    except (ConvergenceError, SingularBlockError) as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polsqueeze",
        description="homodyne squeezing of a driven polariton microcavity")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", metavar="PATH",
                         help="key=value run configuration")
        cmd.add_argument("--out", metavar="PATH",
                         default=name.replace("-", "_") + ".csv",
                         help="output CSV path (default %(default)s)")
        cmd.add_argument("--threads", type=int, default=None, metavar="N",
                         help="worker processes for sweeps")
        cmd.add_argument("--plot", action="store_true",
                         help="render a figure next to the CSV")
        cmd.set_defaults(func=func)
        return cmd

    add("exciton", _cmd_exciton, "screened 1s exciton state")
    add("biexciton", _cmd_biexciton, "two-exciton channel spectra")
    steady = add("steady", _cmd_steady, "driven condensate amplitudes")
    steady.add_argument("--trace", action="store_true",
                        help="print the solver residual history")
    spectrum = add("spectrum", _cmd_spectrum, "homodyne squeezing spectrum")
    spectrum.add_argument("--dump-sigma", action="store_true",
                          help="also write the dressed self-energy tables")
    add("map", _cmd_map, "squeezing over detuning and drive energy")
    add("power-scan", _cmd_power, "optimized squeezing versus input power")
    gain = add("gain-breakdown", _cmd_gain, "parametric gain decomposition")
    gain.add_argument("--delta-c", type=float, default=None, metavar="MEV",
                      help="fixed detuning (skips the optimization step)")
    return parser


def _load_spec(args, *, optional: bool = False) -> RunSpec:
    if args.config is None:
        if optional:
            return default_spec()
        raise ConfigError(["--config is required for this command"])
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read {args.config}: {exc}"]) from None
    return parse_config(text)


def _metadata(spec: RunSpec, **extra) -> dict:
    meta = {"config": serialize(spec).splitlines(),
            "non_paper_inputs": spec.non_paper_inputs()}
    meta.update(extra)
    return meta


def _figure_path(out: str) -> str:
    return os.path.splitext(out)[0] + ".png"


def _axes(out: str):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(5.2, 3.6), constrained_layout=True)
    return fig, ax, plt


def _exciton_state(spec: RunSpec):
    mat = spec.material
    het = Heterostructure(d=mat.d_2D, eps_perp=mat.eps_perp,
                          h=mat.h_int, eps_env=mat.eps_env)
    pot = CoulombTable.build(het)
    eps0 = float(epsilon_q(1e-9, het))
    mu = mat.m_e * mat.m_h / (mat.m_e + mat.m_h)
    grid = log_grid(1e-4, spec.grid.k_max, spec.grid.N_k)
    return solve_exciton(grid, pot, eps0, mu, 1e3 * mat.E_g), pot


def _cmd_exciton(args) -> int:
    spec = _load_spec(args, optional=True)
    state, _ = _exciton_state(spec)
    radius = pair_radius(state)
    print(f"1s binding energy  {state.binding:.6f} meV")
    print(f"1s total energy    {state.energy:.6f} meV")
    print(f"pair radius        {radius:.6f} nm")
    write_csv(args.out,
              [("k_1_per_nm", state.grid.k), ("phi", state.phi)],
              _metadata(spec, binding_mev=state.binding,
                        energy_mev=state.energy, pair_radius_nm=radius))
    if args.plot:
        fig, ax, plt = _axes(args.out)
        ax.loglog(state.grid.k, state.phi)
        ax.set_xlabel("k (1/nm)")
        ax.set_ylabel("1s wavefunction")
        fig.savefig(_figure_path(args.out), dpi=160)
        plt.close(fig)
    print(f"wrote {args.out}")
    return 0


def _cmd_biexciton(args) -> int:
    spec = _load_spec(args, optional=True)
    state, pot = _exciton_state(spec)
    mat = spec.material
    mass_total = mat.m_e + mat.m_h
    a = pair_radius(state)
    grid = log_grid(1e-3 / a, spec.grid.q_max / a, spec.grid.N_q, head=True)
    n_theta = spec.grid.N_theta
    kern = pair_kernels(state, pot, grid, mat.alpha, n_theta=n_theta,
                        n_k=max(8, (3 * n_theta) // 4),
                        n_theta_k=2 * n_theta)
    sectors = {"singlet": diagonalize_sector(kern, -1, state.energy,
                                             mass_total),
               "triplet": diagonalize_sector(kern, +1, state.energy,
                                             mass_total)}
    names, indices, energies, bound = [], [], [], []
    for name, sector in sectors.items():
        below = bound_energies(sector, state.energy)
        print(f"{name}: {below.size} bound state(s)")
        for e in below:
            print(f"  E_total = {e:.6f} meV  "
                  f"binding = {2 * state.energy - e:.6f} meV")
        for i, e in enumerate(np.sort(sector.energies.real)):
            names.append(name)
            indices.append(i)
            energies.append(float(e))
            bound.append(e < 2.0 * state.energy)
    write_csv(args.out,
              [("channel", np.array(names)),
               ("index", np.array(indices)),
               ("energy_meV", np.array(energies)),
               ("bound", np.array(bound))],
              _metadata(spec, e_x0_mev=state.energy))
    if args.plot:
        fig, ax, plt = _axes(args.out)
        for name, marker in (("singlet", "o"), ("triplet", "x")):
            e = np.sort(sectors[name].energies.real)
            ax.plot(e - 2.0 * state.energy, marker, ms=3, label=name)
        ax.axhline(0.0, color="0.6", lw=0.8)
        ax.set_xlabel("state index")
        ax.set_ylabel("E - 2E_x0 (meV)")
        ax.legend()
        fig.savefig(_figure_path(args.out), dpi=160)
        plt.close(fig)
    print(f"wrote {args.out}")
    return 0


def _cmd_steady(args) -> int:
    spec = _load_spec(args)
    model = build_from_spec(spec)
    lam = spec.drive.lambda_in_vector()
    state = solve_steady(model, spec.drive.omega_d, spec.drive.P_in, lam)
    mask = model.minus.energies.real < 2.0 * model.e_x0
    b_bound = complex(state.block.b_cross_minus[mask][0]) if mask.any() \
        else 0j
    for z, name in enumerate(_VALLEYS):
        print(f"valley {name}: a = {state.amp_a[z]:.9e}   "
              f"P = {state.amp_p[z]:.9e}")
    print(f"|B(bound, singlet)| = {abs(b_bound):.9e}")
    print(f"residual {state.residual:.3e} via {state.strategy}")
    if args.trace:
        for stage, residual in state.history:
            print(f"  {stage:12s} residual {residual:.6e}")
    write_csv(args.out,
              [("valley", np.array(_VALLEYS)),
               ("amp_a_re", state.amp_a.real),
               ("amp_a_im", state.amp_a.imag),
               ("amp_p_re", state.amp_p.real),
               ("amp_p_im", state.amp_p.imag)],
              _metadata(spec, residual=state.residual,
                        strategy=state.strategy,
                        bound_amplitude_re=b_bound.real,
                        bound_amplitude_im=b_bound.imag))
    print(f"wrote {args.out}")
    return 0


def _cmd_spectrum(args) -> int:
    spec = _load_spec(args)
    model = build_from_spec(spec)
    lam = spec.drive.lambda_in_vector()
    state = solve_steady(model, spec.drive.omega_d, spec.drive.P_in, lam)
    omegas = spec.grid.omega_grid()
    gain = parametric_gain(model, state)
    sols = [solve_fluctuations(model, state, float(w), gain=gain)
            for w in omegas]
    co = squeezing_spectrum(model, sols, co_polarized(state.lambda_in),
                            channel="co", omega_d=state.omega_d,
                            p_in_mw=state.p_in_mw)
    cross = squeezing_spectrum(model, sols,
                               cross_polarized(state.lambda_in),
                               channel="cross", omega_d=state.omega_d,
                               p_in_mw=state.p_in_mw)
    tag = spec.drive.lambda_out
    if tag == "co":
        sel = co
    elif tag == "cross":
        sel = cross
    else:
        sel = squeezing_spectrum(model, sols, spec.drive.lambda_out_vector(),
                                 channel="custom", omega_d=state.omega_d,
                                 p_in_mw=state.p_in_mw)
    write_csv(args.out,
              [("omega_meV", omegas),
               ("noise_min", sel.noise_min),
               ("theta_star", sel.theta_star),
               ("noise_co", co.noise_min),
               ("noise_cross", cross.noise_min)],
              _metadata(spec, channel=tag, residual=state.residual))
    if args.dump_sigma:
        _dump_sigma(os.path.splitext(args.out)[0] + "_sigma.csv",
                    omegas, sols)
    if args.plot:
        fig, ax, plt = _axes(args.out)
        ax.plot(omegas, co.noise_min, label="co")
        ax.plot(omegas, cross.noise_min, "--", label="cross")
        ax.axhline(1.0, color="0.6", lw=0.8)
        ax.set_xlabel("homodyne frequency (meV)")
        ax.set_ylabel("noise / shot noise")
        ax.legend()
        fig.savefig(_figure_path(args.out), dpi=160)
        plt.close(fig)
    print(f"best co-channel noise {co.noise_min.min():.6f} "
          f"at {omegas[co.noise_min.argmin()]:+.3f} meV")
    print(f"wrote {args.out}")
    return 0


def _dump_sigma(path: str, omegas, sols) -> None:
    quantities = ("sigma", "omega_r", "gamma_x", "gamma_p")
    om, qty, row, col, re, im = [], [], [], [], [], []
    for w, sol in zip(omegas, sols):
        for name in quantities:
            matrix = getattr(sol.forward, name)
            for i in range(2):
                for j in range(2):
                    om.append(float(w))
                    qty.append(name)
                    row.append(i)
                    col.append(j)
                    re.append(matrix[i, j].real)
                    im.append(matrix[i, j].imag)
    write_csv(path, [("omega_meV", np.array(om)),
                     ("quantity", np.array(qty)),
                     ("row", np.array(row)), ("col", np.array(col)),
                     ("re", np.array(re)), ("im", np.array(im))])


def _sweep_axes(spec: RunSpec, model):
    sw = spec.sweep
    deltas = np.linspace(sw.map_delta_min, sw.map_delta_max, sw.map_n_delta)
    drives = default_drive_grid(model, sw.map_drive_span, sw.map_n_drive)
    return deltas, drives


def _cmd_map(args) -> int:
    spec = _load_spec(args)
    model = build_from_spec(spec)
    deltas, drives = _sweep_axes(spec, model)
    result = detuning_drive_map(model, deltas, drives, spec.drive.P_in,
                                spec.drive.lambda_in_vector(),
                                threads=args.threads)
    i, j = result.best_cell()
    best_model = model.at_detuning(float(deltas[i]))
    write_csv(args.out,
              [("detuning_meV", np.repeat(deltas, drives.size)),
               ("omega_d_meV", np.tile(drives, deltas.size)),
               ("noise_co", result.noise_co.ravel()),
               ("noise_cross", result.noise_cross.ravel()),
               ("theta_star", result.theta_co.ravel()),
               ("converged", result.converged.ravel())],
              _metadata(spec, p_in_mw=result.p_in_mw,
                        best_delta_c=float(deltas[i]),
                        best_omega_d=float(drives[j]),
                        best_noise_co=float(result.noise_co[i, j]),
                        lower_polariton=polariton_energies(best_model)[0],
                        half_biexciton=0.5 * bound_biexciton_energy(model)))
    if args.plot:
        fig, ax, plt = _axes(args.out)
        mesh = ax.pcolormesh(deltas, drives, result.noise_co.T,
                             shading="nearest", cmap="viridis")
        fig.colorbar(mesh, ax=ax, label="noise / shot noise")
        ax.set_xlabel("cavity detuning (meV)")
        ax.set_ylabel("drive energy (meV)")
        fig.savefig(_figure_path(args.out), dpi=160)
        plt.close(fig)
    print(f"best cell: delta_c {deltas[i]:+.3f} meV, drive "
          f"{drives[j]:.3f} meV, noise {result.noise_co[i, j]:.6f}")
    print(f"wrote {args.out}")
    return 0


def _cmd_power(args) -> int:
    spec = _load_spec(args)
    model = build_from_spec(spec)
    deltas, drives = _sweep_axes(spec, model)
    sw = spec.sweep
    powers = np.linspace(sw.power_min, sw.power_max, sw.n_power)
    points = power_scan(model, powers, deltas, drives,
                        spec.drive.lambda_in_vector(), threads=args.threads)
    write_csv(args.out,
              [("P_in_mW", np.array([p.p_in_mw for p in points])),
               ("delta_c_meV", np.array([p.delta_c for p in points])),
               ("omega_d_meV", np.array([p.omega_d for p in points])),
               ("noise_co", np.array([p.noise_co for p in points])),
               ("noise_cross", np.array([p.noise_cross for p in points])),
               ("theta_star", np.array([p.theta_co for p in points])),
               ("refined", np.array([p.refined for p in points])),
               ("converged", np.array([p.converged for p in points]))],
              _metadata(spec))
    for p in points:
        note = "" if p.refined else "  (grid point, polish stalled)"
        print(f"P = {p.p_in_mw:6.3f} mW  noise_co = {p.noise_co:.6f}  "
              f"noise_cross = {p.noise_cross:.6f}{note}")
    if args.plot:
        fig, ax, plt = _axes(args.out)
        ax.plot([p.p_in_mw for p in points],
                [p.noise_co for p in points], "-", label="co")
        ax.plot([p.p_in_mw for p in points],
                [p.noise_cross for p in points], "o", mfc="none",
                label="cross")
        ax.axhline(1.0, color="0.6", lw=0.8)
        ax.set_xlabel("input power (mW)")
        ax.set_ylabel("optimized noise / shot noise")
        ax.legend()
        fig.savefig(_figure_path(args.out), dpi=160)
        plt.close(fig)
    print(f"wrote {args.out}")
    return 0


def _cmd_gain(args) -> int:
    spec = _load_spec(args)
    model = build_from_spec(spec)
    deltas, drives = _sweep_axes(spec, model)
    lam = spec.drive.lambda_in_vector()
    if args.delta_c is not None:
        delta_c = float(args.delta_c)
        opt_meta = {"delta_c": delta_c, "optimized": False}
    else:
        point = optimize_cell(model, spec.drive.P_in, deltas, drives, lam,
                              threads=args.threads)
        if not point.converged:
            raise ConvergenceError("no converged cell in the coarse grid")
        delta_c = point.delta_c
        opt_meta = {"delta_c": delta_c, "optimized": True,
                    "omega_d": point.omega_d, "noise_co": point.noise_co}
    local = model.at_detuning(delta_c)
    rows = gain_breakdown_scan(local, drives, spec.drive.P_in, lam)
    share = np.array([r.bound_share if r.converged else np.nan
                      for r in rows])
    write_csv(args.out,
              [("omega_d_meV", np.array([r.omega_d for r in rows])),
               ("total_meV", np.array([abs(r.total) for r in rows])),
               ("biexciton_meV", np.array([abs(r.biexciton) for r in rows])),
               ("bound_meV", np.array([abs(r.bound) for r in rows])),
               ("mean_field_meV", np.array([abs(r.mean_field)
                                            for r in rows])),
               ("pauli_meV", np.array([abs(r.pauli) for r in rows])),
               ("bound_share", share),
               ("noise_co", np.array([r.noise_co for r in rows])),
               ("converged", np.array([r.converged for r in rows]))],
              _metadata(spec, **opt_meta))
    if args.plot:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, (top, bottom) = plt.subplots(2, 1, figsize=(5.2, 5.4),
                                          sharex=True,
                                          constrained_layout=True)
        x = [r.omega_d for r in rows]
        top.plot(x, [r.noise_co for r in rows])
        top.axhline(1.0, color="0.6", lw=0.8)
        top.set_ylabel("noise / shot noise")
        for name in ("biexciton", "bound", "mean_field", "pauli"):
            style = "--" if name == "bound" else "-"
            bottom.plot(x, [abs(getattr(r, name)) for r in rows], style,
                        label=name.replace("_", " "))
        bottom.set_yscale("log")
        bottom.set_xlabel("drive energy (meV)")
        bottom.set_ylabel("|gain| (meV)")
        bottom.legend(fontsize=8)
        fig.savefig(_figure_path(args.out), dpi=160)
        plt.close(fig)
    print(f"delta_c = {delta_c:+.4f} meV")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
