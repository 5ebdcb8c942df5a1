"""Command-line front end.

Settings are resolved in increasing precedence: built-in defaults, top-level
keys of the ``--config`` JSON file, the file's section named after the
subcommand, then explicit flags. Keys use the flag names with dashes or
underscores (``min_frame_errors`` or ``min-frame-errors``).

Every result embeds a provenance block (tool version, seed, SHA-256 of each
input file). Failures print one JSON object to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, presets
from .channels import (
    BacParams,
    BbmParams,
    Dmc4Params,
    FITTERS,
    TwoPageModel,
    bbm_split_moments,
    family_class,
    sample_counts,
)
from .ecc import BoundedDistanceCode, LdpcDecoder, QcLdpcCode, peg_construct_qc
from .errordata import (
    PageKind,
    cell_error_frequencies,
    dump_dataset,
    error_map,
    frame_error_counts,
    load_dataset,
    sample_moments,
    synthesize_dataset,
    write_moments_csv,
)
from .fer import FerCurve, estimate_fer, fer_curve, replay_fer
from .stats import ks_two_sample

TOOL = "flashchan"
RANDOMIZED = {"synth", "ks", "fer", "curve"}
MODEL_CHOICES = ("bac", "bbm", "nabac", "pabac", "dmc4")

DEFAULTS = {
    "workers": 1,
    "format": "json",
    "page": "both",
    "min_frame_errors": 400,
    "frame_length": 8192,
    "frames_per_page": 1,
    "pages_per_block": 64,
    "method": "counts",
    "sim_frames": presets.MODEL_FRAMES,
    "code": "bch",
    "t": 39,
    "bch_n": 8191,
    "bch_k": 7683,
    "ldpc_z": 128,
    "ldpc_dv": 4,
    "ldpc_dc": 64,
    "ldpc_n": 8192,
    "ldpc_seed": 0,
    "llr_mode": "symmetric",
    "max_iter": 50,
}


class ConfigError(Exception):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


class CliError(Exception):
    pass


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Resolved settings plus the provenance of everything read."""

    def __init__(self, command: str, settings: dict):
        self.command = command
        self.s = settings
        self.inputs: dict[str, str] = {}

    def __getattr__(self, name):
        try:
            return self.s[name]
        except KeyError:
            raise AttributeError(name) from None

    def register_input(self, path) -> Path:
        p = Path(path)
        if not p.is_file():
            raise CliError(f"input file not found: {path}")
        self.inputs[str(path)] = _sha256(p)
        return p

    def read_input(self, path) -> str:
        return self.register_input(path).read_text(encoding="utf-8")

    def provenance(self) -> dict:
        return {
            "tool": TOOL,
            "version": __version__,
            "command": self.command,
            "seed": self.s.get("seed"),
            "inputs": dict(sorted(self.inputs.items())),
        }

    def emit(self, text: str, path=None) -> None:
        target = path if path is not None else self.s.get("out")
        if target in (None, "-"):
            sys.stdout.write(text)
        else:
            Path(target).parent.mkdir(parents=True, exist_ok=True)
            Path(target).write_text(text, encoding="utf-8")

    def emit_json(self, result, path=None) -> None:
        doc = {"provenance": self.provenance(), "result": result}
        self.emit(json.dumps(doc, indent=2, sort_keys=False) + "\n", path)

    def emit_csv(self, columns: list[str], rows: list[dict], path=None) -> None:
        buf = io.StringIO()
        for key, value in self.provenance().items():
            buf.write(f"# {key}={json.dumps(value, sort_keys=True)}\n")
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        self.emit(buf.getvalue(), path)


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("common")
    g.add_argument("--config", help="JSON settings file (flags take precedence)")
    g.add_argument("--seed", type=int, help="master seed (required by randomized commands)")
    g.add_argument("--workers", type=int, help="parallel worker processes")
    g.add_argument("--out", help="output path (default stdout)")
    g.add_argument("--format", choices=("csv", "json"))
    g.add_argument("--model", choices=MODEL_CHOICES)
    g.add_argument("--page", choices=("lower", "upper", "both"))
    g.add_argument("--min-frame-errors", type=int, help="stop after this many frame errors (default 400)")
    g.add_argument("--max-frames", type=int, help="frame cap per FER point")


def _source_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--params", help="model parameter JSON file")
    p.add_argument("--vendor", choices=presets.VENDORS, help="use the built-in reference model")
    p.add_argument("--pe", type=int, help="P/E cycle")


def _code_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--code", choices=("bch", "ldpc"))
    p.add_argument("--t", type=int, help="bounded-distance correction radius")
    p.add_argument("--bch-n", type=int)
    p.add_argument("--bch-k", type=int)
    p.add_argument("--ldpc-file", help="QC-LDPC code JSON (Z, shift_table, dv, dc)")
    p.add_argument("--ldpc-z", type=int)
    p.add_argument("--ldpc-dv", type=int)
    p.add_argument("--ldpc-dc", type=int)
    p.add_argument("--ldpc-n", type=int)
    p.add_argument("--ldpc-seed", type=int)
    p.add_argument("--llr-mode", choices=("symmetric", "asymmetric"))
    p.add_argument("--max-iter", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=TOOL, description="MLC flash channel models and FER estimation")
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize an error dataset from a model")
    _common(p)
    _source_args(p)
    p.add_argument("--n-frames", type=int, help="frames per page kind")
    p.add_argument("--frame-length", type=int)
    p.add_argument("--frames-per-page", type=int)
    p.add_argument("--pages-per-block", type=int)
    p.add_argument("--method", choices=("counts", "bitwise"))
    p.add_argument("--levels-out", help="cell-level model only: write written/read levels (.npz)")

    p = sub.add_parser("characterize", help="moments, cell-error table and error map of a dataset")
    _common(p)
    p.add_argument("--input", help="dataset (JSON lines)")
    p.add_argument("--frame-length", type=int)
    p.add_argument("--pe", type=int)
    p.add_argument("--block", type=int, help="block for the error map (default: first)")
    p.add_argument("--levels", help="written/read cell levels (.npz) for the cell-error table")

    p = sub.add_parser("fit", help="fit per-page channel models to a dataset")
    _common(p)
    p.add_argument("--input", help="dataset (JSON lines)")
    p.add_argument("--frame-length", type=int)
    p.add_argument("--pe", type=int)

    p = sub.add_parser("ks", help="two-sample K-S test of a dataset against a model")
    _common(p)
    _source_args(p)
    p.add_argument("--input", help="dataset (JSON lines)")
    p.add_argument("--frame-length", type=int)
    p.add_argument("--sim-frames", type=int, help="model frames to simulate (default 10000)")

    p = sub.add_parser("fer", help="frame error rate at one operating point")
    _common(p)
    _source_args(p)
    _code_args(p)
    p.add_argument("--input", help="replay this dataset instead of simulating")

    p = sub.add_parser("curve", help="frame error rate across P/E cycles")
    _common(p)
    _code_args(p)
    p.add_argument("--params", nargs="+", help="model JSON files, each carrying its 'pe'")
    p.add_argument("--vendor", choices=presets.VENDORS)
    p.add_argument("--pe-cycles", type=int, nargs="+")
    p.add_argument("--input", help="replay this dataset instead of simulating")
    return parser


def _normalize(doc: dict) -> dict:
    return {key.replace("-", "_"): value for key, value in doc.items()}


def resolve_settings(args: argparse.Namespace) -> dict:
    problems: list[str] = []
    settings = dict(DEFAULTS)
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError([f"config: file not found: {args.config}"]) from None
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config: invalid JSON ({exc})"]) from None
        if not isinstance(doc, dict):
            raise ConfigError(["config: top level must be an object"])
        sections = {"synth", "characterize", "fit", "ks", "fer", "curve"}
        settings.update(_normalize({k: v for k, v in doc.items() if k not in sections}))
        section = doc.get(args.command, {})
        if not isinstance(section, dict):
            problems.append(f"config.{args.command}: must be an object")
        else:
            settings.update(_normalize(section))
    for key, value in vars(args).items():
        if value is not None and key not in ("command", "config"):
            settings[key] = value
    settings["config"] = args.config
    _validate(args.command, settings, problems)
    if problems:
        raise ConfigError(problems)
    return settings


def _validate(command: str, s: dict, problems: list[str]) -> None:
    def positive(key, minimum=1):
        v = s.get(key)
        if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < minimum):
            problems.append(f"{key}: must be an integer >= {minimum}, got {v!r}")

    for key in ("workers", "min_frame_errors", "max_frames", "n_frames", "frame_length",
                "frames_per_page", "pages_per_block", "sim_frames", "max_iter", "bch_n", "bch_k",
                "ldpc_z", "ldpc_dv", "ldpc_dc", "ldpc_n"):
        positive(key)
    positive("t", 0)
    replay = command in ("fer", "curve") and s.get("input")
    if command in RANDOMIZED and not replay:
        seed = s.get("seed")
        if seed is None:
            problems.append("seed: required for this command (pass --seed or set 'seed' in the config)")
        elif not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            problems.append(f"seed: must be a nonnegative integer, got {seed!r}")
    choices = {
        "format": ("csv", "json"),
        "page": ("lower", "upper", "both"),
        "model": MODEL_CHOICES,
        "code": ("bch", "ldpc"),
        "llr_mode": ("symmetric", "asymmetric"),
        "method": ("counts", "bitwise"),
    }
    for key, allowed in choices.items():
        if s.get(key) is not None and s[key] not in allowed:
            problems.append(f"{key}: must be one of {list(allowed)}, got {s[key]!r}")
    if s.get("vendor") is not None and str(s["vendor"]).upper() not in presets.VENDORS:
        problems.append(f"vendor: must be one of {list(presets.VENDORS)}, got {s['vendor']!r}")

    if command in ("characterize", "fit", "ks") and not s.get("input"):
        problems.append("input: a dataset file is required")
    if command == "synth" and not s.get("params") and s.get("vendor") is None:
        problems.append("params/vendor: give a parameter file or a reference vendor")
    if command in ("synth", "ks", "fer") and s.get("vendor") is not None and s.get("pe") is None \
            and not s.get("params"):
        problems.append("pe: required with vendor")
    if command == "ks" and not s.get("params") and s.get("vendor") is None and s.get("model") is None:
        problems.append("params/vendor/model: give a model file, a reference vendor, or a family to fit")
    if command == "fer" and not (s.get("params") or s.get("vendor") is not None or s.get("input")):
        problems.append("params/vendor/input: nothing to evaluate")
    if command == "curve" and not (s.get("params") or s.get("vendor") is not None or s.get("input")):
        problems.append("params/vendor/input: nothing to evaluate")


def _pages(setting: str) -> list[PageKind]:
    return [PageKind.LOWER, PageKind.UPPER] if setting == "both" else [PageKind.parse(setting)]


def _canonical_family(name: str) -> str:
    return {"nabac": "na_bac", "pabac": "pa_bac"}.get(name, name)


def _moment_matched(params: BbmParams, family: str, n: int):
    """Convert a beta-binomial page channel to ``family`` with equal moments."""
    if family == "bbm":
        return params
    if family == "bac":
        return BacParams(params.mean_p, params.mean_q)
    m0, s0, m1, s1 = bbm_split_moments(params, n)
    cls = family_class(family)
    return cls(m0, s0 - m0 * m0, m1, s1 - m1 * m1)


def _preset_model(run: Run, pe: int):
    vendor = str(run.vendor).upper()
    family = run.s.get("model") or "bbm"
    if family == "dmc4":
        return presets.dmc4_params(vendor)
    base = presets.bbm_params(vendor, pe)
    page = _moment_matched(base, _canonical_family(family), run.frame_length)
    return TwoPageModel(lower=page, upper=page)


def _page_from_doc(doc: dict, kind: PageKind):
    if doc.get("model") == "dmc4":
        return Dmc4Params(np.asarray(doc["transition"], dtype=float))
    pages = doc.get("pages") or {}
    if kind.value not in pages:
        raise CliError(f"parameter file has no {kind.value} page")
    fields = dict(pages[kind.value])
    family = fields.pop("model", doc.get("model"))
    return family_class(family)(**fields)


def _load_params(run: Run, path) -> dict:
    try:
        doc = json.loads(run.read_input(path))
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})") from None
    # accept our own output envelope as well as a bare model document
    if isinstance(doc, dict) and "result" in doc and "provenance" in doc:
        doc = doc["result"]
    if isinstance(doc, dict) and "models" in doc:
        return doc
    if not isinstance(doc, dict) or "model" not in doc:
        raise CliError(f"{path}: not a model parameter document")
    return doc


def _channel_for(run: Run, kind: PageKind):
    """Page channel from --params or the reference vendor."""
    if run.s.get("params"):
        doc = _load_params(run, run.params)
        if "models" in doc:
            docs = doc["models"]
            if run.s.get("pe") is not None:
                docs = [d for d in docs if d.get("pe") == run.pe]
            if len(docs) != 1:
                raise CliError("parameter file holds several models; select one with --pe")
            doc = docs[0]
        return _page_from_doc(doc, kind)
    model = _preset_model(run, run.pe)
    return model if isinstance(model, Dmc4Params) else model.page(kind)


def _load_data(run: Run):
    text = run.read_input(run.input)
    return load_dataset(text)


def cmd_synth(run: Run) -> None:
    if run.s.get("params"):
        doc = _load_params(run, run.params)
        if doc.get("model") == "dmc4":
            model = _page_from_doc(doc, PageKind.LOWER)
        else:
            model = TwoPageModel(lower=_page_from_doc(doc, PageKind.LOWER),
                                 upper=_page_from_doc(doc, PageKind.UPPER))
        pe = run.s.get("pe") if run.s.get("pe") is not None else doc.get("pe", 0)
        vendor = "synthetic"
    else:
        pe = run.pe
        model = _preset_model(run, pe)
        vendor = f"reference-{str(run.vendor).upper()}"
    n_frames = run.s.get("n_frames")
    if n_frames is None:
        n_frames = presets.empirical_frames(run.vendor) if run.s.get("vendor") else 1000
    out = synthesize_dataset(
        model, n_frames, run.frame_length, pe_cycle=pe, seed=run.seed,
        frames_per_page=run.frames_per_page, pages_per_block=run.pages_per_block,
        method=run.method, vendor=vendor, return_levels=bool(run.s.get("levels_out")),
    )
    dataset = out[0] if isinstance(out, tuple) else out
    buf = io.StringIO()
    dump_dataset(dataset, buf, extra_meta={"provenance": run.provenance()})
    run.emit(buf.getvalue())
    if isinstance(out, tuple):
        np.savez_compressed(run.levels_out, written=out[1], read=out[2])


def cmd_characterize(run: Run) -> None:
    data = _load_data(run)
    n = min(run.s.get("frame_length") or data.frame_length, data.frame_length)
    cycles = [run.pe] if run.s.get("pe") is not None else data.pe_cycles
    rows = []
    for pe in cycles:
        for kind in _pages(run.page):
            if not data.select(kind, pe):
                continue
            counts = frame_error_counts(data, kind, pe, n)
            rows.append((pe, kind.value, sample_moments(counts)))
    if not rows:
        raise CliError("no frames match the selection")

    recs = data.select(None, cycles[0])
    block = run.s.get("block")
    block = recs[0].block if block is None else block
    emap = error_map(data, block, pe_cycle=cycles[0], frame_length=n,
                     page_kind=None if run.page == "both" else run.page)
    cells = None
    if run.s.get("levels"):
        with np.load(run.register_input(run.levels)) as z:
            cells = cell_error_frequencies(z["written"], z["read"])

    if run.format == "json":
        result = {
            "moments": [{"pe": pe, "page": page, **m.to_row()} for pe, page, m in rows],
            "error_map": {"block": block, "pe": cycles[0], "pages": emap.pages,
                          "grid": [[None if np.isnan(v) else int(v) for v in row] for row in emap.grid]},
        }
        if cells is not None:
            result["cell_errors"] = {"counts": cells.counts.tolist(),
                                     "percentages": cells.percentages.tolist(),
                                     "cell_error_rate": cells.cell_error_rate}
        run.emit_json(result)
        return
    # csv: one file per table; --out names a directory
    out_dir = Path(run.s.get("out") or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    write_moments_csv(rows, buf)
    reader = list(csv.DictReader(io.StringIO(buf.getvalue())))
    run.emit_csv(list(reader[0].keys()), reader, out_dir / "moments.csv")
    grid_cols = ["page"] + [f"f{i}" for i in range(emap.grid.shape[1])]
    grid_rows = [{"page": pg, **{f"f{i}": ("" if np.isnan(v) else int(v)) for i, v in enumerate(row)}}
                 for pg, row in zip(emap.pages, emap.grid)]
    run.emit_csv(grid_cols, grid_rows, out_dir / "error_map.csv")
    if cells is not None:
        labels = ["11", "10", "00", "01"]
        cell_rows = [{"written": labels[i], **{labels[j]: f"{cells.percentages[i, j]:.4f}" for j in range(4)}}
                     for i in range(4)]
        run.emit_csv(["written"] + labels, cell_rows, out_dir / "cell_errors.csv")


def cmd_fit(run: Run) -> None:
    data = _load_data(run)
    n = min(run.s.get("frame_length") or data.frame_length, data.frame_length)
    family = _canonical_family(run.s.get("model") or "bbm")
    if family == "dmc4":
        raise CliError("the cell-level model is not fitted from page records")
    fitter = FITTERS[family]
    cycles = [run.pe] if run.s.get("pe") is not None else data.pe_cycles
    docs = []
    for pe in cycles:
        pages = {}
        for kind in _pages(run.page):
            if not data.select(kind, pe):
                raise CliError(f"no {kind.value}-page frames at {pe} P/E cycles")
            moments = sample_moments(frame_error_counts(data, kind, pe, n))
            pages[kind.value] = {k: float(v) for k, v in asdict(fitter(moments, n)).items()}
        docs.append({"model": family, "pages": pages, "n": int(n), "pe": int(pe)})
    result = docs[0] if len(docs) == 1 else {"models": docs}
    if run.format == "csv":
        rows = [{"pe": d["pe"], "page": pg, "model": family, **vals}
                for d in docs for pg, vals in d["pages"].items()]
        cols = ["pe", "page", "model"] + [k for k in rows[0] if k not in ("pe", "page", "model")]
        run.emit_csv(cols, rows)
    else:
        run.emit_json(result)


def cmd_ks(run: Run) -> None:
    data = _load_data(run)
    n = min(run.s.get("frame_length") or data.frame_length, data.frame_length)
    cycles = [run.pe] if run.s.get("pe") is not None else data.pe_cycles
    if len(cycles) != 1:
        raise CliError(f"dataset spans P/E cycles {cycles}; select one with --pe")
    pe = cycles[0]
    run.s["pe"] = pe
    seq = np.random.SeedSequence(run.seed)
    results = []
    for kind, child in zip(_pages(run.page), seq.spawn(2)):
        counts = frame_error_counts(data, kind, pe, n)
        if run.s.get("params") or run.s.get("vendor") is not None:
            channel = _channel_for(run, kind)
            family = getattr(channel, "family", "dmc4")
        else:
            family = _canonical_family(run.model)
            channel = FITTERS[family](sample_moments(counts), n)
        if isinstance(channel, Dmc4Params):
            raise CliError("K-S comparison needs a page channel")
        rng = np.random.default_rng(child)
        k0, k1 = sample_counts(channel, n, run.sim_frames, rng)
        res = ks_two_sample(counts.k, k0 + k1)
        results.append({"pe": pe, "page": kind.value, "model": family, **res.to_dict()})
    if run.format == "csv":
        run.emit_csv(list(results[0].keys()), results)
    else:
        run.emit_json(results[0] if len(results) == 1 else results)


def _decoder(run: Run):
    if run.code == "bch":
        return BoundedDistanceCode(run.bch_n, run.bch_k, run.t)
    if run.s.get("ldpc_file"):
        code = QcLdpcCode.from_json(run.read_input(run.ldpc_file))
    else:
        code = peg_construct_qc(run.ldpc_z, run.ldpc_dv, run.ldpc_dc, run.ldpc_n, seed=run.ldpc_seed)
    return LdpcDecoder(code, max_iter=run.max_iter, llr_mode=run.llr_mode)


FER_COLUMNS = ["pe", "model", "code", "page", "frames", "errors", "fer", "ci_lo", "ci_hi", "reason"]


def cmd_fer(run: Run) -> None:
    decoder = _decoder(run)
    estimates = []
    for i, kind in enumerate(_pages(run.page)):
        if run.s.get("input"):
            data = _load_data(run)
            est = replay_fer(data, decoder, kind, pe_cycle=run.s.get("pe"))
            model = "empirical"
        else:
            channel = _channel_for(run, kind)
            model = getattr(channel, "family", "dmc4")
            est = estimate_fer(
                channel, decoder, page=kind, min_frame_errors=run.min_frame_errors,
                max_frames=run.s.get("max_frames"), master_seed=(run.seed, i), workers=run.workers,
            )
        estimates.append((kind, model, est))
    if run.format == "csv":
        rows = []
        for kind, model, est in estimates:
            lo, hi = est.ci95
            rows.append({"pe": run.s.get("pe"), "model": model, "code": est.config["code"],
                         "page": kind.value, "frames": est.frames_simulated, "errors": est.frame_errors,
                         "fer": est.fer, "ci_lo": lo, "ci_hi": hi, "reason": est.stopping_reason})
        run.emit_csv(FER_COLUMNS, rows)
    else:
        docs = [{"page": kind.value, "model": model, **est.to_dict()} for kind, model, est in estimates]
        run.emit_json(docs[0] if len(docs) == 1 else docs)


def cmd_curve(run: Run) -> None:
    decoder = _decoder(run)
    curves: list[FerCurve] = []
    for kind in _pages(run.page):
        if run.s.get("input"):
            data = _load_data(run)
            curve = fer_curve(data, decoder, run.s.get("pe_cycles"), page=kind)
        else:
            inputs = {}
            if run.s.get("params"):
                paths = run.params if isinstance(run.params, list) else [run.params]
                for path in paths:
                    doc = _load_params(run, path)
                    for d in doc.get("models", [doc]):
                        if "pe" not in d:
                            raise CliError(f"{path}: model lacks its 'pe' cycle")
                        inputs[int(d["pe"])] = _page_from_doc(d, kind)
            else:
                for pe in run.s.get("pe_cycles") or presets.PE_CYCLES:
                    model = _preset_model(run, pe)
                    inputs[pe] = model if isinstance(model, Dmc4Params) else model.page(kind)
            curve = fer_curve(
                inputs, decoder, run.s.get("pe_cycles"), page=kind, master_seed=run.seed,
                min_frame_errors=run.min_frame_errors, max_frames=run.s.get("max_frames"),
                workers=run.workers,
            )
        curves.append(curve)
    if run.format == "csv":
        run.emit_csv(FER_COLUMNS, [row for c in curves for row in c.rows()])
    else:
        docs = [c.to_dict() for c in curves]
        run.emit_json(docs[0] if len(docs) == 1 else docs)


COMMANDS = {
    "synth": cmd_synth,
    "characterize": cmd_characterize,
    "fit": cmd_fit,
    "ks": cmd_ks,
    "fer": cmd_fer,
    "curve": cmd_curve,
}


def _fail(kind: str, message: str, problems: list[str] | None = None, code: int = 1) -> int:
    doc = {"error": kind, "message": message}
    if problems is not None:
        doc["problems"] = problems
    sys.stderr.write(json.dumps(doc) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        settings = resolve_settings(args)
        COMMANDS[args.command](Run(args.command, settings))
    except ConfigError as exc:
        return _fail("config", "invalid configuration", exc.problems, code=2)
    except (CliError, ValueError, TypeError, KeyError, OSError) as exc:
        return _fail(type(exc).__name__, str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
