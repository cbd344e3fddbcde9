"""Command-line entry point: ``pbitnqs <subcommand> ...``.

Exit codes: 0 success, 2 configuration or size-limit error, 3 numerical abort.
Every subcommand that takes a config writes only inside ``output.dir`` and
leaves a ``manifest.json`` there; ``pbitnqs train run/manifest.json`` re-runs
the recorded configuration.
"""
import argparse
import json
import logging
import os
import sys

from . import __version__, kernels
from .config import ConfigError, load_config
from .lattice import LatticeError, build_tfim_bonds
from .model import ArchitectureError, init_params, load_checkpoint, param_count, save_checkpoint
from .oracle import (OracleSizeError, check_ed_size, golden_cases, golden_csv,
                     marginal_fixture_csv, open_chain_bonds, tfim_ground_energy)
from .partition import PartitionError, partition_graph, scan_csv, staleness_bias_scan
from .sampler import sample_visible
from .sr import IllConditionedError
from .trainer import TrainingAbort, evaluate, metrics_csv, train

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
log = logging.getLogger("pbitnqs")


class UsageError(Exception):
    pass


def _outdir(rc):
    path = rc["output.dir"]
    os.makedirs(path, exist_ok=True)
    return path


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _manifest(out, command, rc, outputs, extra=None):
    rec = {
        "command": command,
        "version": __version__,
        "config_hash": rc.hash(),
        "seed": rc["run.seed"],
        "config_text": rc.to_text(),
        "outputs": sorted(outputs),
    }
    if extra:
        rec.update(extra)
    _write(os.path.join(out, "manifest.json"), json.dumps(rec, indent=1, sort_keys=True) + "\n")


def _load_theta(rc, tc, out):
    path = rc["model.checkpoint"] or os.path.join(out, "checkpoint.json")
    try:
        theta, _ = load_checkpoint(path)
    except OSError:
        raise ConfigError(f"no checkpoint at {path}; set model.checkpoint") from None
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad checkpoint {path}: {exc}") from None
    if not theta.topology.same_structure(tc.topology()):
        raise ConfigError("checkpoint architecture does not match the config")
    return theta


def cmd_train(args):
    rc = load_config(args.config)
    tc = rc.training_config()
    out = _outdir(rc)
    theta0 = _load_theta(rc, tc, out) if rc["model.checkpoint"] else None
    history = []
    try:
        res = train(tc, theta0, callback=lambda m, th: history.append(m))
    except TrainingAbort as exc:
        _write(os.path.join(out, "metrics.csv"), metrics_csv(history))
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _write(os.path.join(out, "metrics.csv"), metrics_csv(res.history))
    save_checkpoint(os.path.join(out, "checkpoint.json"), res.theta, seed=tc.seed,
                    extra={"config_hash": rc.hash()})
    _manifest(out, "train", rc, ["metrics.csv", "checkpoint.json"],
              {"n_params": res.theta.topology.n_params})
    last = res.history[-1]
    print(f"final energy per spin {last.energy_per_spin:.8f} +- {last.std_err:.2e}")
    return EXIT_OK


def cmd_evaluate(args):
    rc = load_config(args.config)
    tc = rc.training_config()
    out = _outdir(rc)
    theta = _load_theta(rc, tc, out)
    try:
        E, se = evaluate(theta, tc)
    except (FloatingPointError, IllConditionedError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    row = {"energy_per_spin": repr(E), "std_err": repr(se)}
    if tc.n_sites <= 16 and tc.L >= 3:
        e0 = tfim_ground_energy(tc.L, tc.J, tc.gamma) / tc.n_sites
        row["ed_energy_per_spin"] = repr(e0)
        row["rel_error"] = repr((E - e0) / abs(e0))
    _write(os.path.join(out, "evaluation.csv"), ",".join(row) + "\n" + ",".join(row.values()) + "\n")
    _manifest(out, "evaluate", rc, ["evaluation.csv"])
    print(", ".join(f"{k}={v}" for k, v in row.items()))
    return EXIT_OK


def cmd_sample(args):
    rc = load_config(args.config)
    tc = rc.training_config()
    out = _outdir(rc)
    if rc["model.checkpoint"] or os.path.exists(os.path.join(out, "checkpoint.json")):
        theta = _load_theta(rc, tc, out)
    else:
        theta = init_params(tc.topology(), tc.seed)
    batch = sample_visible(theta, rc["sampling.n"], tc.burn_in, tc.sweeps_per_sample, seed=tc.seed)
    lines = [",".join(f"v{i}" for i in range(batch.visible.shape[1]))]
    lines += [",".join(str(int(x)) for x in row) for row in batch.visible]
    _write(os.path.join(out, "samples.csv"), "\n".join(lines) + "\n")
    _manifest(out, "sample", rc, ["samples.csv"])
    print(f"wrote {len(batch)} samples")
    return EXIT_OK


def cmd_oracle(args):
    if args.config:
        rc = load_config(args.config)
        out = _outdir(rc)
        chains, lattices, gammas, J = (rc["oracle.chains"], rc["oracle.lattices"],
                                       rc["oracle.gammas"], rc["oracle.J"])
    else:
        rc, out = None, args.out
        os.makedirs(out, exist_ok=True)
        chains, lattices, gammas, J = [], [], [], 1.0
    cases = golden_cases()
    # validate every size before computing anything
    for n in chains:
        check_ed_size(n)
    for L in lattices:
        check_ed_size(L * L)
        bonds = build_tfim_bonds(L)
        for g in gammas:
            cases.append((f"torus_L{L}_J{J:g}_g{g:g}", L * L, bonds, J, g))
    for n in chains:
        for g in gammas:
            cases.append((f"chain_N{n}_J{J:g}_g{g:g}", n, open_chain_bonds(n), J, g))
    _write(os.path.join(out, "golden_ed.csv"), golden_csv(cases))
    _write(os.path.join(out, "brute_marginals.csv"), marginal_fixture_csv())
    if rc is not None:
        _manifest(out, "oracle", rc, ["golden_ed.csv", "brute_marginals.csv"])
    print(f"wrote {len(cases)} ED rows to {out}")
    return EXIT_OK


def cmd_param_count(args):
    try:
        k1 = float(args.k1)
        k2 = None if args.k2 is None else float(args.k2)
    except ValueError:
        raise UsageError("radii must be numbers") from None
    arch = {"rbm": "frbm"}.get(args.arch.lower(), args.arch.lower())
    print(param_count(arch, args.L, k1, k2))
    return EXIT_OK


def cmd_partition_scan(args):
    rc = load_config(args.config)
    tc = rc.training_config()
    out = _outdir(rc)
    if rc["model.checkpoint"]:
        theta = _load_theta(rc, tc, out)
    else:
        theta = init_params(tc.topology(), tc.seed, scale=args.init_scale)
    part = partition_graph(theta.topology.graph, tc.partitions, seed=tc.seed)
    rows = staleness_bias_scan(theta, part, rc["partition.taus"], rc["partition.sweeps"], seed=tc.seed,
                               burn_in=tc.burn_in, bins=tc.bins)
    _write(os.path.join(out, "partition.txt"), part.to_text())
    _write(os.path.join(out, "scan.csv"), scan_csv(rows))
    _manifest(out, "partition-scan", rc, ["partition.txt", "scan.csv"],
              {"cut_fraction": part.cut_fraction, "exchange_bits": part.exchange_bits})
    print(f"P={part.n_parts} cut_fraction={part.cut_fraction:.4f} exchange_bits={part.exchange_bits}")
    print(scan_csv(rows), end="")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="pbitnqs", description="p-bit neural quantum state toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({kernels.BACKEND} kernels)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("train", help="train a model; writes metrics.csv, checkpoint.json, manifest.json")
    s.add_argument("config")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", help="frozen-parameter energy of a checkpoint")
    s.add_argument("config")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sample", help="visible configurations from the p-bit sampler")
    s.add_argument("config")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("oracle", help="regenerate ED golden values and brute-marginal fixtures")
    s.add_argument("config", nargs="?")
    s.add_argument("--out", default=".", help="output directory when no config is given")
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("param-count", help="number of variational parameters")
    s.add_argument("arch", help="rbm, frbm or dbm")
    s.add_argument("L", type=int)
    s.add_argument("k1")
    s.add_argument("k2", nargs="?")
    s.set_defaults(func=cmd_param_count)

    s = sub.add_parser("partition-scan", help="partition a model graph and scan staleness bias over tau")
    s.add_argument("config")
    s.add_argument("--init-scale", type=float, default=0.5,
                   help="weight scale of random parameters when no checkpoint is given")
    s.set_defaults(func=cmd_partition_scan)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OracleSizeError, LatticeError, ArchitectureError, PartitionError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
