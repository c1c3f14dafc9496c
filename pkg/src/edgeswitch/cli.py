"""Command-line front end.

    edgeswitch calibrate [--grid GRID.conf] --out TABLE.json
    edgeswitch run --config RUN.conf
    edgeswitch decode (HEX | --file PATH)
    edgeswitch table list [--bindings PATH]
    edgeswitch table set --tid N --algorithm NAME [--threshold-mm T | --table PATH] [--bindings PATH]

Config files are flat ``key = value`` text; ``#`` starts a comment. Exit codes:
0 ok, 1 config error, 2 IO error, 3 invariant violation.
"""
from __future__ import annotations

import argparse
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .dataplane import TID_PASSTHROUGH, TID_POSE_CORRECT, TID_TREMOR
from .geometry import GridConfig, GridError, build_correction_table
from .harness import TopologyConfig, metrics_csv, run_experiment
from .trajgen import TaskKind, TaskSpec, TremorModel, write_trajectory_csv
from .wire import FRAME_LEN, WireError, decode_frame

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_INVARIANT = 0, 1, 2, 3

ALGORITHMS = ("passthrough", "tremor_suppress", "pose_correct")
DEFAULT_BINDINGS = {
    TID_PASSTHROUGH: ("passthrough", ""),
    TID_POSE_CORRECT: ("pose_correct", "default"),
    TID_TREMOR: ("tremor_suppress", "0.5"),
}


class ConfigError(ValueError):
    pass


class InvariantError(RuntimeError):
    pass


def parse_flat(text: str, allowed=None) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if allowed is not None and key not in allowed:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def write_atomic(path, data) -> None:
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _num(cfg: dict, key: str, cast, default):
    if key not in cfg:
        return default
    try:
        return cast(cfg[key])
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {cfg[key]!r}") from None


GRID_KEYS = {"n", "m", "gap_x_mm", "gap_y_mm", "base_index", "threshold"}


def load_grid(path) -> GridConfig:
    if path is None:
        return GridConfig()
    cfg = parse_flat(Path(path).read_text(), GRID_KEYS)
    d = GridConfig()
    try:
        return GridConfig(
            n=_num(cfg, "n", int, d.n), m=_num(cfg, "m", int, d.m),
            gap_x=_num(cfg, "gap_x_mm", float, d.gap_x),
            gap_y=_num(cfg, "gap_y_mm", float, d.gap_y),
            base_index=_num(cfg, "base_index", int, d.base_index),
            threshold=_num(cfg, "threshold", int, d.threshold),
        )
    except GridError as e:
        raise ConfigError(str(e)) from None


# -- bindings file ----------------------------------------------------------

def load_bindings(path) -> dict:
    """TID -> (algorithm, parameter string). Missing file means defaults."""
    if path is None or not Path(path).exists():
        return dict(DEFAULT_BINDINGS)
    out = {}
    for key, value in parse_flat(Path(path).read_text()).items():
        try:
            tid = int(key)
        except ValueError:
            raise ConfigError(f"binding key {key!r} is not a TID") from None
        name, _, param = value.partition(" ")
        _check_binding(tid, name, param.strip())
        out[tid] = (name, param.strip())
    return out


def _check_binding(tid: int, name: str, param: str) -> None:
    if not 0 <= tid <= 0xFFFF:
        raise ConfigError(f"TID {tid} outside 16 bits")
    if name not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {name!r}; expected one of {', '.join(ALGORITHMS)}")
    if name == "tremor_suppress":
        try:
            if float(param) < 0:
                raise ValueError
        except ValueError:
            raise ConfigError(f"tremor_suppress needs a non-negative threshold in mm, got {param!r}") from None


def format_bindings(bindings: dict) -> str:
    lines = [f"{tid} = {name} {param}".rstrip() for tid, (name, param) in sorted(bindings.items())]
    return "\n".join(lines) + "\n"


# -- run config ---------------------------------------------------------------

RUN_KEYS = {
    "task", "duration_s", "sample_rate_hz", "path_length_mm", "threshold_mm",
    "tremor_amplitude_um", "seed", "grid_config", "bindings", "metrics_csv",
    "trajectory_csv", "event_log", "link_delay_ns", "residence_ns",
}


@dataclass
class RunConfig:
    task: TaskKind
    thresholds_mm: list
    duration_s: float | None = None
    sample_rate_hz: float = 1000.0
    path_length_mm: float | None = None
    tremor_amplitude_um: float = 100.0
    seed: int = 0
    grid_config: str | None = None
    metrics_csv: str = "metrics.csv"
    trajectory_csv: str | None = None
    event_log: str | None = None
    topology: TopologyConfig = field(default_factory=TopologyConfig)


def _threshold_list(text: str) -> list:
    out = []
    for part in text.split(","):
        part = part.strip().lower()
        if part == "none":
            out.append(None)
            continue
        try:
            v = float(part)
        except ValueError:
            raise ConfigError(f"threshold_mm: cannot parse {part!r}") from None
        if v < 0:
            raise ConfigError("threshold_mm must be non-negative")
        out.append(v)
    return out


def load_run_config(path) -> RunConfig:
    cfg = parse_flat(Path(path).read_text(), RUN_KEYS)
    if "task" not in cfg:
        raise ConfigError("task is required")
    try:
        task = TaskKind(cfg["task"].lower())
    except ValueError:
        raise ConfigError(f"unknown task {cfg['task']!r}") from None
    base = Path(path).parent
    if "threshold_mm" in cfg:
        thresholds = _threshold_list(cfg["threshold_mm"])
    else:
        bindings = load_bindings(base / cfg["bindings"] if "bindings" in cfg else None)
        name, param = bindings.get(TID_TREMOR, ("passthrough", ""))
        thresholds = [float(param)] if name == "tremor_suppress" else [None]

    def out_path(key, default):
        v = cfg.get(key, default)
        return None if v is None else str(base / v)

    return RunConfig(
        task=task,
        thresholds_mm=thresholds,
        duration_s=_num(cfg, "duration_s", float, None),
        sample_rate_hz=_num(cfg, "sample_rate_hz", float, 1000.0),
        path_length_mm=_num(cfg, "path_length_mm", float, None),
        tremor_amplitude_um=_num(cfg, "tremor_amplitude_um", float, 100.0),
        seed=_num(cfg, "seed", int, 0),
        grid_config=out_path("grid_config", None),
        metrics_csv=out_path("metrics_csv", "metrics.csv"),
        trajectory_csv=out_path("trajectory_csv", None),
        event_log=out_path("event_log", None),
        topology=TopologyConfig(
            link_delay_ns=_num(cfg, "link_delay_ns", int, 1000),
            residence_ns=_num(cfg, "residence_ns", int, 100),
        ),
    )


def execute_run(rc: RunConfig):
    load_grid(rc.grid_config)
    try:
        spec = TaskSpec(rc.task, duration_s=rc.duration_s, sample_rate_hz=rc.sample_rate_hz,
                        path_length_mm=rc.path_length_mm)
        tremor = TremorModel(amplitude_um=rc.tremor_amplitude_um, seed=rc.seed)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    results = [run_experiment(spec, tremor, thr, rc.topology) for thr in rc.thresholds_mm]
    for r in results:
        m = r.metrics
        if m.transmitted + m.discarded != m.offered:
            raise InvariantError(f"conservation broken: {m.transmitted} + {m.discarded} != {m.offered}")
        if not 0.0 <= m.traffic_reduction <= 100.0:
            raise InvariantError(f"traffic reduction {m.traffic_reduction} outside [0, 100]")
    return spec, tremor, results


# -- commands -----------------------------------------------------------------

def cmd_calibrate(args) -> int:
    grid = load_grid(args.grid)
    table = build_correction_table(grid)
    write_atomic(args.out, table.to_json())
    print(f"entries: {len(table)}")
    return EXIT_OK


def cmd_run(args) -> int:
    rc = load_run_config(args.config)
    spec, tremor, results = execute_run(rc)
    write_atomic(rc.metrics_csv, metrics_csv([r.metrics for r in results]))
    if rc.trajectory_csv:
        tmp = Path(rc.trajectory_csv).with_name(f".{Path(rc.trajectory_csv).name}.partial")
        write_trajectory_csv(tmp, spec, tremor)
        os.replace(tmp, rc.trajectory_csv)
    if rc.event_log:
        chunks = []
        for thr, r in zip(rc.thresholds_mm, results):
            label = "none" if thr is None else f"{thr:g}"
            chunks.append(f"# task={spec.kind.value} threshold_mm={label} seed={rc.seed}\n")
            chunks.append(r.event_log.text())
        write_atomic(rc.event_log, "".join(chunks))
    for r in results:
        m = r.metrics
        thr = "none" if m.threshold_mm is None else f"{m.threshold_mm:g} mm"
        print(f"{m.task} threshold={thr}: transmitted={m.transmitted} discarded={m.discarded} "
              f"reduction={m.traffic_reduction:.2f}% rate={m.avg_rate_kbps:.1f} kbps")
    return EXIT_OK


def _read_frame(args) -> bytes:
    if args.file:
        raw = Path(args.file).read_bytes()
        if len(raw) == FRAME_LEN:
            return raw
        text = raw.decode("ascii", errors="replace")
    else:
        text = args.hex or ""
    try:
        return bytes.fromhex("".join(text.split()))
    except ValueError:
        raise WireError("input is neither a raw frame nor hex text") from None


def format_frame(frame: bytes) -> str:
    meta, tel, addr = decode_frame(frame)
    mac = lambda b: ":".join(f"{v:02x}" for v in b)  # noqa: E731
    ip = lambda b: ".".join(str(v) for v in b)  # noqa: E731
    lines = [
        f"dst_mac = {mac(addr.dst_mac)}",
        f"src_mac = {mac(addr.src_mac)}",
        f"ethertype = {addr.ethertype}",
        f"src_ip = {ip(addr.src_ip)}",
        f"dst_ip = {ip(addr.dst_ip)}",
        f"src_port = {addr.src_port}",
        f"dst_port = {addr.dst_port}",
        f"sid = {meta.sid}",
        f"tid = {meta.tid}",
    ]
    for name in ("x", "y", "z"):
        v = getattr(meta, name)
        lines.append(f"{name} = {v} units ({v * 0.01:.2f} mm)")
    for name in ("qx", "qy", "qz", "qw"):
        v = getattr(meta, name)
        lines.append(f"{name} = {v} units ({v / 10000:.4f})")
    lines += [f"b1 = {meta.b1}", f"b2 = {meta.b2}"]
    lines += [f"f{i} = {v}" for i, v in enumerate(meta.fsr)]
    lines += [
        f"ingress_ts = {tel.ingress_ts} ns",
        f"egress_ts = {tel.egress_ts} ns",
        f"pkt_len = {tel.pkt_len} bytes",
        f"ingress_port = {tel.ingress_port}",
        f"egress_port = {tel.egress_port}",
    ]
    return "\n".join(lines)


def cmd_decode(args) -> int:
    print(format_frame(_read_frame(args)))
    return EXIT_OK


def cmd_table(args) -> int:
    bindings = load_bindings(args.bindings)
    if args.action == "list":
        sys.stdout.write(format_bindings(bindings))
        return EXIT_OK
    if args.tid is None or args.algorithm is None:
        raise ConfigError("table set needs --tid and --algorithm")
    param = ""
    if args.algorithm == "tremor_suppress":
        param = "" if args.threshold_mm is None else f"{args.threshold_mm:g}"
    elif args.algorithm == "pose_correct":
        param = args.table or "default"
        if param != "default" and not Path(param).is_file():
            raise ConfigError(f"correction table {param!r} not found")
    _check_binding(args.tid, args.algorithm, param)
    bindings[args.tid] = (args.algorithm, param)
    write_atomic(args.bindings, format_bindings(bindings))
    print(f"{args.tid} = {args.algorithm} {param}".rstrip())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgeswitch", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", help="build the pose-correction table")
    c.add_argument("--grid", help="grid config file (defaults to the 5x3 pad)")
    c.add_argument("--out", required=True, help="table JSON to write")
    c.set_defaults(func=cmd_calibrate)

    r = sub.add_parser("run", help="run a tremor-suppression experiment")
    r.add_argument("--config", required=True)
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("decode", help="print a 130-byte frame field by field")
    d.add_argument("hex", nargs="?", help="frame as hex text")
    d.add_argument("--file", help="raw frame or hex text file")
    d.set_defaults(func=cmd_decode)

    t = sub.add_parser("table", help="list or update TID bindings")
    t.add_argument("action", choices=("list", "set"))
    t.add_argument("--bindings", default="bindings.conf")
    t.add_argument("--tid", type=int)
    t.add_argument("--algorithm")
    t.add_argument("--threshold-mm", type=float)
    t.add_argument("--table", help="correction table JSON for pose_correct")
    t.set_defaults(func=cmd_table)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GridError, ValueError) as e:
        if isinstance(e, WireError) and args.command == "decode":
            print(f"error: malformed frame: {e}", file=sys.stderr)
        else:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except InvariantError as e:
        print(f"invariant violated: {e}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
