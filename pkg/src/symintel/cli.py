"""Command line entry point: ``symintel <command> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import codec
from . import verify as checks
from .agents import make_agent, zoo_ids
from .fixtures import load_table, random_fixture_pairs
from .framework import Environment
from .intelligence import Inventory, group_classes, upsilon_enumerated, upsilon_sampled
from .machine import (
    Machine,
    Probe,
    Rejected,
    all_bitstrings,
    parse_program_label,
    probe_program,
    program_label,
    program_to_environment,
)
from .spaces import Space, default_space, format_space, parse_space
from .valuation import CertificationRefused, certify_well_behaved, value_exact

MANIFEST_COLUMNS = ["program_hex", "length_bits", "accepted", "reason", "env_id", "k_hat"]


# -- manifests -------------------------------------------------------------------


def _hex(p: str) -> str:
    return program_label(p).split(":")[0]


def _probe_row(args: tuple[Machine, str, int, int]) -> tuple[str, bool, str]:
    machine, p, H, T = args
    probe = probe_program(machine, p, H, T)
    return p, probe.accepted, probe.reason


def read_program_file(text: str) -> list[str]:
    """One ``hex[:nbits]`` program per line; ``#`` starts a comment."""
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(parse_program_label(line))
    return out


def enumerate_inventory(machine: Machine, L: int, T: int, H: int, workers: int = 1,
                        extra_programs: list[str] = ()) -> Inventory:
    programs = list(all_bitstrings(L))
    seen = set(programs)
    programs += [p for p in dict.fromkeys(extra_programs) if p not in seen]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_probe_row, [(machine, p, H, T) for p in programs], chunksize=256))
        probes = []
        for p, ok, reason in rows:
            probes.append(probe_program(machine, p, H, T) if ok else Probe(p, False, reason))
    else:
        probes = [probe_program(machine, p, H, T) for p in programs]
    return Inventory(machine, L, T, H, probes, group_classes(probes))


def write_manifest(inventory: Inventory) -> str:
    m = inventory.machine
    buf = io.StringIO()
    buf.write("# symintel inventory manifest v1\n")
    buf.write(f"# L = {inventory.L}\n# T = {inventory.T}\n# H = {inventory.H}\n")
    buf.write(f"# machine = {'symmetric' if m.symmetric else 'corrupted'}\n")
    buf.write(f"# permutable = {int(m.permutable)}\n")
    for line in format_space(m.space).splitlines():
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MANIFEST_COLUMNS)
    for probe in inventory.probes:
        if probe.accepted:
            env_id = probe.env.env_id
            w.writerow([_hex(probe.program), len(probe.program), 1, "", env_id, inventory.classes[env_id].k_hat])
        else:
            w.writerow([_hex(probe.program), len(probe.program), 0, probe.reason, "", ""])
    return buf.getvalue()


def read_manifest(text: str) -> Inventory:
    meta: dict[str, str] = {}
    space_lines = []
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            key = key.strip()
            if not sep:
                continue
            if key in ("actions", "observations", "rewards"):
                space_lines.append(line[1:].strip())
            else:
                meta[key] = value.strip()
        elif line.strip():
            body.append(line)
    space = parse_space("\n".join(space_lines))
    machine = Machine(space, symmetric=meta.get("machine", "symmetric") == "symmetric",
                      permutable=meta.get("permutable", "0") == "1")
    L, T, H = int(meta["L"]), int(meta["T"]), int(meta["H"])
    probes = []
    for row in csv.DictReader(body):
        p = parse_program_label(f"{row['program_hex']}:{row['length_bits']}")
        if row["accepted"] == "1":
            probe = probe_program(machine, p, H, T)
            if not probe.accepted or probe.env.env_id != row["env_id"]:
                raise ValueError(f"manifest row {row['program_hex']} does not reproduce")
            probes.append(probe)
        else:
            probes.append(Probe(p, False, row["reason"]))
    return Inventory(machine, L, T, H, probes, group_classes(probes))


def _load_space(path: str | None) -> Space:
    return parse_space(Path(path).read_text()) if path else default_space()


def _load_inventory(path: str) -> Inventory:
    return read_manifest(Path(path).read_text())


def _environment(args, space: Space) -> Environment:
    if getattr(args, "fixture", None):
        env = load_table(space, Path(args.fixture).read_text())
        if not isinstance(env, Environment):
            raise SystemExit("fixture is not an environment")
        return env
    machine = Machine(space)
    try:
        return program_to_environment(machine, parse_program_label(args.program), args.H, args.T)
    except Rejected as exc:
        raise SystemExit(f"program rejected: {exc.reason} (witness {exc.witness})")


def _frac(q: Fraction) -> tuple[int, int]:
    return q.numerator, q.denominator


def _emit_csv(rows, header, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


# -- commands --------------------------------------------------------------------


def cmd_enumerate(args) -> int:
    space = _load_space(args.space)
    machine = Machine(space, symmetric=not args.corrupt, permutable=args.permutable)
    extra = read_program_file(Path(args.programs).read_text()) if args.programs else []
    inventory = enumerate_inventory(machine, args.L, args.T, args.H, args.workers, extra)
    text = write_manifest(inventory)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    accepted = len(inventory.accepted())
    print(f"{accepted} accepted programs, {len(inventory.classes)} environments, digest {inventory.digest}",
          file=sys.stderr)
    return 0


def cmd_certify(args) -> int:
    space = _load_space(args.space)
    if args.fixture:
        env = load_table(space, Path(args.fixture).read_text())
    else:
        machine = Machine(space)
        try:
            env = program_to_environment(machine, parse_program_label(args.program), args.H, args.T)
        except Rejected as exc:
            print(f"rejected,{exc.reason},{exc.witness}")
            return 1
    try:
        cert = certify_well_behaved(env, args.H)
    except CertificationRefused as exc:
        print(f"refused,{type(exc).__name__},{exc.budget},{exc.witness}")
        return 1
    print(f"certified,H={cert.horizon},budget={cert.budget}")
    return 0


def cmd_value(args) -> int:
    space = _load_space(args.space)
    agent = make_agent(space, args.agent)
    env = _environment(args, space)
    res = value_exact(agent, env, args.n)
    _emit_csv([[args.agent, env.name, res.n, *_frac(res.value), res.histories_enumerated]],
              ["agent_id", "env_id", "n", "value_num", "value_den", "histories_enumerated"], sys.stdout)
    return 0


def cmd_upsilon(args) -> int:
    inventory = _load_inventory(args.inventory)
    space = inventory.machine.space
    rows = []
    for agent_id in args.agent:
        agent = make_agent(space, agent_id)
        if args.sampled:
            if args.seed is None:
                raise SystemExit("--seed is required with --sampled")
            est = upsilon_sampled(agent, inventory, args.sampled, args.seed)
        else:
            est = upsilon_enumerated(agent, inventory)
        se = "" if est.std_error is None else repr(est.std_error)
        rows.append([agent_id, est.mode, *_frac(est.value), *_frac(est.abs_value), *est.bounds, est.inventory_digest,
                     est.samples or "", se])
    _emit_csv(rows, ["agent_id", "mode", "value_num", "value_den", "abs_num", "abs_den", "L", "T", "H",
                     "inventory_digest", "samples", "std_error"], sys.stdout)
    if args.plot_data:
        with open(args.plot_data, "w") as fh:
            _emit_csv([[r[0], str(Fraction(r[2], r[3]))] for r in rows], ["agent_id", "value"], fh)
    return 0


def cmd_compare(args) -> int:
    inventory = _load_inventory(args.inventory)
    space = inventory.machine.space
    a = upsilon_enumerated(make_agent(space, args.first), inventory).value
    b = upsilon_enumerated(make_agent(space, args.second), inventory).value
    print("pi-greater" if a > b else "rho-greater" if a < b else "equal")
    return 0


def run_verification(inventory: Inventory, agent_ids: list[str], fixtures: int, horizons: list[int],
                     permutable_inventory: Inventory | None = None, codec_checks: bool = True) -> list:
    space = inventory.machine.space
    agents = [make_agent(space, i) for i in agent_ids]
    pairs = random_fixture_pairs(space, fixtures)
    results = []
    if pairs:
        results.append(checks.check_dual_values(pairs, horizons))
        results.append(checks.check_twist(pairs, horizons))
        results.append(checks.check_double_negation(pairs, max(horizons)))
        results.append(checks.check_certificate_duality([mu for _, mu in pairs], max(horizons)))
        results.append(checks.check_permutation_values(pairs, horizons))
    results.extend(checks.check_machine_symmetry(inventory))
    results.append(checks.check_upsilon_symmetry(agents, inventory))
    results.append(checks.check_reward_ignoring_zero(agents, inventory))
    results.append(checks.check_order_reversal(agents, inventory))
    if permutable_inventory is not None:
        results.append(checks.check_permutable_upsilon(agents, permutable_inventory))
    if codec_checks:
        results.extend(checks.check_codec(space))
    return results


def cmd_verify(args) -> int:
    inventory = _load_inventory(args.inventory)
    space = inventory.machine.space
    agent_ids = zoo_ids(space) if args.agents is None else [a for a in args.agents.split(",") if a]
    perm_inv = _load_inventory(args.permutable_inventory) if args.permutable_inventory else None
    horizons = list(range(args.max_n + 1))
    results = run_verification(inventory, agent_ids, args.fixtures, horizons, perm_inv, not args.skip_codec)
    if args.report:
        Path(args.report).write_text(checks.results_csv(results))
    sys.stdout.write(checks.summarize(results))
    return 0 if all(r.passed for r in results) else 1


def cmd_encode(args) -> int:
    space = _load_space(args.space)
    if args.decode:
        value = codec.decode(space, bytes.fromhex(args.decode))
        print(value if isinstance(value, tuple) else {f"{o},{r}": str(p) for (o, r), p in value.items()})
        return 0
    if args.history is not None:
        toks = args.history.split()
        s = tuple(Fraction(t) if i % 3 == 1 else t for i, t in enumerate(toks))
        print(codec.encode_history(space, s).hex())
        return 0
    if args.measure is not None:
        m = {}
        for tok in args.measure.split():
            key, _, p = tok.rpartition(":")
            o, _, r = key.partition(",")
            m[(o, Fraction(r))] = Fraction(p)
        print(codec.encode_measure(space, m).hex())
        return 0
    raise SystemExit("give --history, --measure or --decode")


def cmd_run(args) -> int:
    space = _load_space(args.space)
    machine = Machine(space)
    p = parse_program_label(args.program)
    x = codec.to_bits(bytes.fromhex(args.input)) if args.input else ""
    run = machine.run(p, x, args.steps)
    if not run.halted:
        print(f"diverged,{run.steps},{run.reason}")
        return 1
    out = run.output
    try:
        rendered = codec.from_bits(out).hex()
    except codec.NotACodeword:
        rendered = f"bits:{out}"
    print(f"halted,{run.steps},{rendered}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symintel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def bounds(p, L=True):
        if L:
            p.add_argument("--L", type=int, default=12, help="maximum program length in bits")
        p.add_argument("--T", type=int, default=64, help="step budget per query")
        p.add_argument("--H", type=int, default=2, help="horizon (rounds 0..H count)")

    p = sub.add_parser("enumerate", help="enumerate programs and write an inventory manifest")
    bounds(p)
    p.add_argument("--space")
    p.add_argument("--out")
    p.add_argument("--corrupt", action="store_true", help="negative control: NEG branch passes through")
    p.add_argument("--permutable", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--programs", help="file of extra hand-written programs (hex[:nbits] per line)")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("certify", help="certify a program or fixture environment")
    bounds(p, L=False)
    p.add_argument("--space")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--program")
    g.add_argument("--fixture")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("value", help="exact expected reward of an agent in one environment")
    bounds(p, L=False)
    p.add_argument("--space")
    p.add_argument("--agent", required=True)
    p.add_argument("--n", type=int, required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--program")
    g.add_argument("--fixture")
    p.set_defaults(func=cmd_value)

    p = sub.add_parser("upsilon", help="truncated intelligence of agents over an inventory")
    p.add_argument("--agent", action="append", required=True)
    p.add_argument("--inventory", required=True)
    p.add_argument("--sampled", type=int, default=0, metavar="N")
    p.add_argument("--seed", type=int)
    p.add_argument("--plot-data")
    p.set_defaults(func=cmd_upsilon)

    p = sub.add_parser("compare", help="compare two agents")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--inventory", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify", help="run the symmetry checks")
    p.add_argument("--inventory", required=True)
    p.add_argument("--permutable-inventory")
    p.add_argument("--agents", help="comma separated agent ids (default: the stock zoo; '' for none)")
    p.add_argument("--fixtures", type=int, default=50)
    p.add_argument("--max-n", type=int, default=3)
    p.add_argument("--skip-codec", action="store_true")
    p.add_argument("--report")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("encode", help="encode a history or measure, or decode hex")
    p.add_argument("--space")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--history", help="symbols separated by spaces, e.g. 'o0 1/2 a1'")
    g.add_argument("--measure", help="entries like 'o0,1/2:3/4 o0,-1/2:1/4'")
    g.add_argument("--decode", metavar="HEX")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("run", help="run a program on the symmetric machine")
    p.add_argument("--space")
    p.add_argument("--program", required=True, help="hex[:nbits]")
    p.add_argument("--input", default="", help="input bytes as hex")
    p.add_argument("--steps", type=int, default=64)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
