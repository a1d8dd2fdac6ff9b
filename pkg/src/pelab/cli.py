"""Command-line entry point.

Every command is deterministic for a fixed --seed. JSON output is sorted,
indented and carries schema_version 1. Exit codes: 0 ok, 2 usage error,
3 refusal (size limits), 4 verification failure.
"""

from __future__ import annotations

import json
import math
import sys

import click
import numpy as np

from . import hamiltonian as ham
from . import machine as mach
from .entanglement import cut_entropy, entropy_bounds, entropy_profile, profile_csv, t_matrix
from .grid2d import SIDE_LIMIT, GridState, law_check
from .lossy_dcra import DcraKey, DcraParams, dcra_eval_bits, dcra_keygen
from .lossy_lwe import LweKey, LweParams, lwe_eval, lwe_keygen
from .numcore import DomainError, RefusalError, SeededRng
from .phasestate import ChainKey, PhaseOracle, TreeKey, materialize, sample_chain_key, sample_tree_key

SCHEMA_VERSION = 1
STATE_LIMIT = 24
PEBBLE_LIMIT = 1 << 16
HAM_STEP_LIMIT = 20_000
EXIT_USAGE, EXIT_REFUSAL, EXIT_VERIFY = 2, 3, 4

FAMILIES = ("dcra", "lwe", "tree", "chain")
MACHINES = {"toggle": mach.toggle_machine, "hadamard": mach.hadamard_machine}


class VerificationFailed(Exception):
    def __init__(self, doc: dict):
        super().__init__("verification failed")
        self.doc = doc


def dumps(doc: dict) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, **doc}, sort_keys=True, indent=2) + "\n"


def emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def load_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise DomainError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    return doc


def load_key(path: str):
    doc = load_json(path)
    fam, body = doc.get("family"), doc.get("key")
    if fam == "dcra":
        return fam, DcraKey.from_json(body)
    if fam == "lwe":
        return fam, LweKey.from_json(body)
    if fam == "tree":
        return fam, TreeKey.from_json(body)
    if fam == "chain":
        return fam, ChainKey.from_json(body)
    raise DomainError(f"{path}: unknown key family {fam!r}")


def oracle_of(fam: str, key) -> PhaseOracle:
    if fam not in ("tree", "chain"):
        raise DomainError(f"{fam} keys do not define a phase state")
    if key.n > STATE_LIMIT:
        raise RefusalError(f"n = {key.n} exceeds the state-vector limit {STATE_LIMIT}")
    return PhaseOracle(key.n, fam, key)


def parse_input(x: str, n: int) -> int:
    if x.startswith("0x"):
        v = int(x, 16)
    elif len(x) == n and set(x) <= {"0", "1"}:
        v = int(x, 2)
    else:
        v = int(x)
    if v < 0 or v >> n:
        raise DomainError(f"input must fit in {n} bits")
    return v


def seed_option(f):
    return click.option("--seed", type=int, default=0, show_default=True, help="64-bit seed.")(f)


def out_option(f):
    return click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (stdout if absent).")(f)


def format_option(*choices):
    def deco(f):
        return click.option("--format", "fmt", type=click.Choice(choices), default=choices[0], show_default=True)(f)
    return deco


@click.group()
@click.version_option(package_name="pelab")
def cli():
    """Pseudoentanglement lab: lossy keys, phase states, clock machines and Hamiltonians."""


# ---------------------------------------------------------------------------
# keys and states


@cli.command()
@click.option("--family", type=click.Choice(FAMILIES), required=True)
@click.option("--mode", required=True, help="injective|lossy (dcra, lwe) or low|high (tree, chain).")
@click.option("--n", "n", type=int, required=True)
@click.option("--lam", type=int, default=2, show_default=True, help="lambda; for chain keys the start width ell.")
@seed_option
@out_option
def keygen(family, mode, n, lam, seed, out):
    """Sample a key. The mode is not recorded in the key body."""
    rng = SeededRng(seed)
    if family == "dcra":
        key = dcra_keygen(DcraParams.for_input(n, lam), mode, rng)
    elif family == "lwe":
        key = lwe_keygen(LweParams.theorem(n, lam), mode, rng)
    elif family == "tree":
        key = sample_tree_key(n, lam, mode, rng)
    else:
        key = sample_chain_key(n, lam, mode, rng)
    emit(dumps({"family": family, "key": key.to_json()}), out)


@cli.command(name="eval")
@click.argument("keyfile", type=click.Path(exists=True, dir_okay=False))
@click.option("--x", "xs", multiple=True, help="Input as bit string, decimal or 0x hex; repeatable.")
@click.option("--all", "all_inputs", is_flag=True, help="Evaluate every input (n <= 24).")
@out_option
@format_option("json", "csv")
def eval_cmd(keyfile, xs, all_inputs, out, fmt):
    """Evaluate a key on inputs."""
    fam, key = load_key(keyfile)
    n = key.params.n if fam in ("dcra", "lwe") else key.n
    if all_inputs:
        if n > STATE_LIMIT:
            raise RefusalError(f"n = {n} exceeds {STATE_LIMIT}")
        values = range(1 << n)
    elif xs:
        values = [parse_input(x, n) for x in xs]
    else:
        raise click.UsageError("give --x or --all")
    if fam == "dcra":
        fn = lambda v: dcra_eval_bits(key, format(v, f"0{n}b"))  # noqa: E731
    elif fam == "lwe":
        fn = lambda v: list(lwe_eval(key, v))  # noqa: E731
    else:
        orc = oracle_of(fam, key)
        fn = orc
    rows = [(v, fn(v)) for v in values]
    if fmt == "csv":
        lines = ["x,value"] + [f"{format(v, f'0{n}b')},{json.dumps(y) if isinstance(y, list) else y}" for v, y in rows]
        emit("\n".join(lines) + "\n", out)
    else:
        emit(dumps({"family": fam, "n": n, "outputs": [{"x": format(v, f"0{n}b"), "value": y} for v, y in rows]}), out)


@cli.command()
@click.argument("keyfile", type=click.Path(exists=True, dir_okay=False))
@click.option("--margin", type=int, default=1, show_default=True, help="Skip this many cuts at each end.")
@out_option
@format_option("csv", "json")
def profile(keyfile, margin, out, fmt):
    """Entropy of every prefix cut of the key's phase state."""
    fam, key = load_key(keyfile)
    psi = materialize(oracle_of(fam, key))
    prof = entropy_profile(psi, margin)
    if fmt == "csv":
        emit(profile_csv(prof), out)
    else:
        emit(dumps({"n": key.n, "profile": [{"cut": c, "entropy_bits": s} for c, s in prof]}), out)


@cli.command()
@click.argument("keyfile", type=click.Path(exists=True, dir_okay=False))
@click.option("--cut", type=int, default=None, help="Prefix length; every cut if absent.")
@out_option
def tbounds(keyfile, cut, out):
    """T-matrix lower and upper bounds beside the exact cut entropy."""
    fam, key = load_key(keyfile)
    orc = oracle_of(fam, key)
    psi = materialize(orc)
    cuts = [cut] if cut is not None else list(range(1, key.n))
    rows = []
    for c in cuts:
        if not 1 <= c < key.n:
            raise DomainError(f"cut must lie in [1, {key.n - 1}]")
        lo, hi = entropy_bounds(t_matrix(orc, range(c)))
        rows.append({"cut": c, "lower": lo, "entropy_bits": cut_entropy(psi, range(c)), "upper": hi})
    emit(dumps({"n": key.n, "cuts": rows}), out)


@cli.command()
@click.argument("keyfile", type=click.Path(exists=True, dir_okay=False))
@click.option("--side", type=int, required=True)
@click.option("--samples", type=int, default=100, show_default=True)
@click.option("--mode", type=click.Choice(["low", "high"]), required=True, help="Law to check.")
@seed_option
@out_option
def grid(keyfile, side, samples, mode, seed, out):
    """Area or volume law of the side x side grid state built from the key's row state."""
    fam, key = load_key(keyfile)
    if key.n != side:
        raise click.UsageError(f"grid has side^2 = {side * side} sites but the key gives {key.n} * {key.n}")
    if side > SIDE_LIMIT:
        raise RefusalError(f"side above {SIDE_LIMIT} refused")
    gs = GridState(side, materialize(oracle_of(fam, key)))
    rep = law_check(gs, mode, samples, SeededRng(seed))
    emit(dumps({"side": side, "seed": seed, **rep}), out)


# ---------------------------------------------------------------------------
# machines and Hamiltonians


def machine_option(f):
    return click.option("--machine", "machine_name", type=click.Choice(sorted(MACHINES)), default="toggle",
                        show_default=True)(f)


def _check_input(w: str, n: int, tm: mach.TuringMachine) -> str:
    if len(w) != n or not set(w) <= set(tm.alphabet):
        raise click.UsageError(f"input must be {n} symbols from {list(tm.alphabet)}")
    return w


@cli.command(name="machine-run")
@machine_option
@click.option("--n", "n", type=int, default=3, show_default=True)
@click.option("--k", "k", type=int, default=1, show_default=True)
@click.option("--input", "w", default=None, help="Input word (default all zeros).")
@click.option("--tracks", default=None, help="Comma-separated tracks to render (default all).")
@out_option
@format_option("json", "jsonl")
def machine_run(machine_name, n, k, w, tracks, out, fmt):
    """Run the clock machine to its halting configuration."""
    tm = MACHINES[machine_name]()
    w = _check_input(w or tm.alphabet[0] * n, n, tm)
    rs, init = mach.build_clock_machine(n, k, tm, w)
    hist = mach.run_history(rs, init)
    if fmt == "jsonl":
        emit(mach.history_jsonl(hist), out)
        return
    show = [int(t) for t in tracks.split(",")] if tracks else list(range(rs.layout.tracks))
    steps = []
    for sup in hist:
        steps.append(sorted(c.render(show) for c in sup))
    emit(dumps({
        "machine": tm.name, "n": n, "k": k, "input": w,
        "steps": len(hist) - 1, "init_phase": 2 * n, "tracks": show, "history": steps,
    }), out)


def _build(machine_name, n, k, w) -> ham.HamiltonianSpec:
    tm = MACHINES[machine_name]()
    w = _check_input(w or tm.alphabet[0] * n, n, tm)
    if n >= 2 and k >= 1 and mach.halting_time(n, k) > HAM_STEP_LIMIT:
        raise RefusalError(f"history longer than {HAM_STEP_LIMIT} steps refused")
    return ham.build_hamiltonian(n, k, tm, w)


@cli.command(name="ham-build")
@machine_option
@click.option("--n", "n", type=int, default=3, show_default=True)
@click.option("--k", "k", type=int, default=1, show_default=True)
@click.option("--w", "w", default=None, help="Accepted input w* (default all zeros).")
@click.option("--grid-side", type=int, default=None, help="Embed the chain on a grid along the snake path.")
@out_option
def ham_build(machine_name, n, k, w, grid_side, out):
    """Write the generating description of H = H_valid + H_transition + H_input."""
    H = _build(machine_name, n, k, w)
    if grid_side is not None:
        H = ham.embed_snake(H, grid_side)
    emit(dumps({"hamiltonian": H.to_json()}), out)


def verify_report(H: ham.HamiltonianSpec, tol: float = 1e-9) -> dict:
    hist = ham.branch(H, H.w_star)
    R = ham.restrict(H.select("transition"), hist)
    T = R.dim
    psi = ham.history_state(H, mach.initial_config(H.layout, H.w_star))
    h_in = ham.apply(H.select("input"), psi)
    input_energy = float(np.real(ham.inner(psi, h_in)))
    ev = ham.spectrum(ham.restrict(H, hist), 2)
    gap = float(ev[1] - ev[0]) if len(ev) > 1 else 0.0
    rep = {
        "T": T,
        "residual": ham.norm(ham.apply(H, psi)),
        "tridiagonal_error": float(np.max(np.abs(np.asarray(R.matrix) - ham.path_matrix(T)))),
        "leakage": R.leakage,
        "input_energy": input_energy,
        "ground_energy": float(ev[0]),
        "gap": gap,
        "path_gap": 1 - math.cos(math.pi / T),
    }
    rep["ok"] = bool(rep["residual"] <= tol and rep["tridiagonal_error"] <= tol and rep["leakage"] <= tol
                     and abs(input_energy) <= tol and abs(gap - rep["path_gap"]) <= tol)
    return rep


@cli.command(name="ham-verify")
@click.argument("hamfile", type=click.Path(exists=True, dir_okay=False))
@out_option
def ham_verify(hamfile, out):
    """Check the history state of w* against a stored Hamiltonian."""
    H = ham.HamiltonianSpec.from_json(load_json(hamfile)["hamiltonian"])
    rep = verify_report(H)
    doc = dumps({"w_star": H.w_star, **rep})
    emit(doc, out)
    if not rep["ok"]:
        raise VerificationFailed(rep)


@cli.command()
@click.argument("hamfile", type=click.Path(exists=True, dir_okay=False), required=False)
@machine_option
@click.option("--n", "n", type=int, default=3, show_default=True)
@click.option("--k", "k", type=int, default=1, show_default=True)
@click.option("--w", "w", default=None)
@click.option("--count", type=int, default=4, show_default=True, help="Number of lowest eigenvalues.")
@click.option("--samples", type=int, default=4, show_default=True, help="Other-input blocks to sample.")
@seed_option
@out_option
@format_option("json", "csv")
def gap(hamfile, machine_name, n, k, w, count, samples, seed, out, fmt):
    """Spectrum of H on the w* history block, other inputs and invalid configurations."""
    if hamfile:
        H = ham.HamiltonianSpec.from_json(load_json(hamfile)["hamiltonian"])
    else:
        H = _build(machine_name, n, k, w)
    R = ham.restrict(H, ham.branch(H, H.w_star))
    ev = ham.spectrum(R, count)
    if fmt == "csv":
        emit(ham.spectra_csv(ev), out)
        return
    rep = ham.gap_report(H, samples=samples, seed=seed)
    emit(dumps({"w_star": H.w_star, "eigenvalues": [float(v) for v in ev], **rep}), out)


@cli.command()
@click.option("--T", "T", type=int, required=True, help="Number of computation steps.")
@click.option("--pebbles", type=int, required=True)
@out_option
def pebble(T, pebbles, out):
    """Reversible pebbling schedule for T steps."""
    if T > PEBBLE_LIMIT:
        raise RefusalError(f"T above {PEBBLE_LIMIT} refused")
    sched = mach.pebble_schedule(T, pebbles)
    emit(dumps(sched.to_json()), out)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="pelab", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except mach.InfeasibleError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_REFUSAL
    except RefusalError as e:
        click.echo(f"refused: {e}", err=True)
        return EXIT_REFUSAL
    except DomainError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_USAGE
    except VerificationFailed:
        click.echo("verification failed", err=True)
        return EXIT_VERIFY
    return 0


if __name__ == "__main__":
    sys.exit(main())
