"""Unified command-line front end: manifest ingestion, batch orchestration,
and JSON report emission for every module.

Exit codes: 0 = all rows ok, 1 = partial failure, 2 = configuration error.
"""

from __future__ import annotations

import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from . import __version__, corrupt, evalharness, imgcore, spectra, stats, theoryval


@dataclass
class TripletRow:
    item_id: str
    original_path: Path
    generated_path: Path
    mask_path: Path
    dataset: str | None = None


def load_triplet_manifest(path) -> list[TripletRow]:
    """CSV with header item_id,original_path,generated_path,mask_path[,dataset];
    paths relative to the manifest's directory."""
    path = Path(path)
    base = path.parent
    rows: list[TripletRow] = []
    errors: list[str] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"item_id", "original_path", "generated_path", "mask_path"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise click.UsageError(
                f"{path}: manifest header must contain {sorted(required)} "
                f"(got {reader.fieldnames})"
            )
        for lineno, row in enumerate(reader, start=2):
            item_id = row.get("item_id") or ""
            if not item_id:
                errors.append(f"line {lineno}: empty item_id")
                continue
            if item_id in seen:
                errors.append(f"line {lineno}: duplicate item_id {item_id!r}")
                continue
            seen.add(item_id)
            rows.append(
                TripletRow(
                    item_id=item_id,
                    original_path=base / row["original_path"],
                    generated_path=base / row["generated_path"],
                    mask_path=base / row["mask_path"],
                    dataset=row.get("dataset") or None,
                )
            )
    if errors:
        raise click.UsageError(f"{path}: malformed manifest rows:\n" + "\n".join(errors))
    return rows


def _run_config(subcommand: str, params: dict, seed: int | None) -> dict:
    return {
        "subcommand": subcommand,
        "params": {k: v for k, v in sorted(params.items())},
        "seed": seed,
        "version": __version__,
    }


def write_report(payload: dict, out: str | None) -> None:
    """Key-sorted JSON; written temp-then-rename so readers never see a
    partial file. out=None prints to stdout."""
    text = json.dumps(payload, sort_keys=True, indent=2)
    if out is None:
        click.echo(text)
        return
    out_path = Path(out)
    tmp = out_path.with_name(out_path.name + ".tmp")
    tmp.write_text(text + "\n")
    os.replace(tmp, out_path)


@click.group()
def main():
    """Inpainting-exchange forensics toolkit."""


@main.command("exchange")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["hard", "soft"]), default="hard", show_default=True)
@click.option("--band-width", type=int, default=2, show_default=True)
@click.option("--kernel", type=int, default=5, show_default=True)
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--jobs", type=int, default=None, help="parallel workers (default: cores)")
@click.option("--out", type=click.Path(), default=None, help="summary JSON path (default: stdout)")
def cmd_exchange(manifest, mode, band_width, kernel, out_dir, jobs, out):
    """Write exchanged composites for every manifest row."""
    rows = load_triplet_manifest(manifest)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def process(row: TripletRow) -> dict:
        try:
            original = imgcore.load_image(row.original_path)
            generated = imgcore.load_image(row.generated_path)
            mask = imgcore.load_mask(row.mask_path)
            if mode == "soft":
                result = imgcore.soft_exchange(original, generated, mask, band_width, kernel)
            else:
                result = imgcore.exchange(original, generated, mask)
            dest = out_dir / f"{row.item_id}.png"
            imgcore.save_image(result, dest, format="png")
            return {
                "item_id": row.item_id,
                "status": "ok",
                "output": str(dest),
                "mask_ratio": imgcore.mask_ratio(mask),
            }
        except (OSError, ValueError) as exc:
            return {"item_id": row.item_id, "status": "error", "error": str(exc)}

    with ThreadPoolExecutor(max_workers=jobs or os.cpu_count()) as pool:
        items = list(pool.map(process, rows))
    items.sort(key=lambda d: d["item_id"])
    ratios = [d["mask_ratio"] for d in items if d["status"] == "ok"]
    n_failed = sum(1 for d in items if d["status"] != "ok")
    payload = {
        "config": _run_config(
            "exchange",
            {"manifest": str(manifest), "mode": mode, "band_width": band_width,
             "kernel": kernel, "out_dir": str(out_dir)},
            None,
        ),
        "results": {
            "items": items,
            "n_ok": len(items) - n_failed,
            "n_failed": n_failed,
            "mask_ratio_stats": {
                "mean": float(np.mean(ratios)) if ratios else None,
                "min": float(np.min(ratios)) if ratios else None,
                "max": float(np.max(ratios)) if ratios else None,
            },
        },
    }
    write_report(payload, out)
    if n_failed:
        sys.exit(1)


@main.command("corrupt")
@click.option("--op", required=True, type=click.Choice(["blur", "light", "jpeg"]))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
@click.option("--sigma", type=float, default=3.0, show_default=True)
@click.option("--radius", type=float, default=120.0, show_default=True)
@click.option("--gain", type=float, default=1.5, show_default=True)
@click.option("--quality", type=int, default=80, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def cmd_corrupt(op, input_path, output, sigma, radius, gain, quality, seed):
    """Apply one corruption to one image file."""
    img = imgcore.load_image(input_path)
    try:
        if op == "blur":
            result = corrupt.gaussian_blur(img, sigma)
        elif op == "light":
            result, params = corrupt.light_spot_random(img, radius, gain, seed)
            click.echo(json.dumps({"center": list(params.center)}), err=True)
        else:
            result = corrupt.jpeg_compress(img, quality)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    imgcore.save_image(result, output, format="png")


@main.group("spectrum", invoke_without_command=True)
@click.option("--input-manifest", type=click.Path(exists=True))
@click.option("--resize", type=int, default=512, show_default=True)
@click.option("--out", type=click.Path(), default=None)
@click.option("--heatmap", type=click.Path(), default=None)
@click.pass_context
def cmd_spectrum(ctx, input_manifest, resize, out, heatmap):
    """Build a spectral fingerprint from a corpus manifest (item_id,path)."""
    if ctx.invoked_subcommand is not None:
        return
    if input_manifest is None or out is None:
        raise click.UsageError("spectrum requires --input-manifest and --out")
    base = Path(input_manifest).parent
    paths = []
    with open(input_manifest, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "path" not in reader.fieldnames:
            raise click.UsageError(f"{input_manifest}: header must contain 'path'")
        for row in reader:
            paths.append(base / row["path"])
    if not paths:
        raise click.UsageError(f"{input_manifest}: no rows")
    fp = spectra.fingerprint((imgcore.load_image(p) for p in paths), resize_to=resize)
    fp.save(out)
    if heatmap:
        fp.save_heatmap(heatmap)


@cmd_spectrum.command("diff")
@click.option("--a", "path_a", required=True, type=click.Path(exists=True))
@click.option("--b", "path_b", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None)
def cmd_spectrum_diff(path_a, path_b, out):
    """Spectral MSE (x1000) between two saved fingerprints."""
    a = spectra.SpectralFingerprint.load(path_a)
    b = spectra.SpectralFingerprint.load(path_b)
    try:
        mse = spectra.spectral_mse(a, b)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    payload = {
        "config": _run_config("spectrum diff", {"a": str(path_a), "b": str(path_b)}, None),
        "results": {"mse_x1000": mse},
    }
    write_report(payload, out)


def _load_map(path: Path) -> np.ndarray:
    img = imgcore.load_image(path)
    return img.luma2d()


@main.command("correlate")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--level", type=click.Choice(["image", "pixel"]), default="image", show_default=True)
@click.option("--region", type=click.Choice(["full", "background"]), default="full", show_default=True)
@click.option("--out", type=click.Path(), default=None)
def cmd_correlate(manifest, level, region, out):
    """Correlate the reconstruction/inpainting/high-frequency signal triple.

    Image level expects scalar columns vae_loss,inpaint_diff,high_freq; pixel
    level expects map paths vae_path,inpaint_path,highfreq_path[,mask_path].
    """
    base = Path(manifest).parent
    triples: list[stats.SignalTriple] = []
    masks = []
    with open(manifest, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = set(reader.fieldnames or [])
        if level == "image":
            needed = {"vae_loss", "inpaint_diff", "high_freq"}
        else:
            needed = {"vae_path", "inpaint_path", "highfreq_path"}
        if not needed.issubset(fields):
            raise click.UsageError(f"{manifest}: header must contain {sorted(needed)}")
        for row in reader:
            if level == "image":
                triples.append(
                    stats.SignalTriple(
                        vae_loss=float(row["vae_loss"]),
                        inpaint_diff=float(row["inpaint_diff"]),
                        high_freq=float(row["high_freq"]),
                    )
                )
            else:
                triples.append(
                    stats.SignalTriple(
                        vae_loss=_load_map(base / row["vae_path"]),
                        inpaint_diff=_load_map(base / row["inpaint_path"]),
                        high_freq=_load_map(base / row["highfreq_path"]),
                    )
                )
                if region == "background":
                    if not row.get("mask_path"):
                        raise click.UsageError(
                            f"{manifest}: background region needs mask_path per row"
                        )
                    masks.append(imgcore.load_mask(base / row["mask_path"]))
    try:
        if level == "image":
            report = stats.image_level_correlations(triples)
        else:
            report = stats.pixel_level_correlations(
                triples, masks=masks if region == "background" else None, region=region
            )
    except ValueError as exc:
        raise click.UsageError(str(exc))
    payload = {
        "config": _run_config(
            "correlate", {"manifest": str(manifest), "level": level, "region": region}, None
        ),
        "results": report.to_dict(),
    }
    write_report(payload, out)


@main.command("eval-cls")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def cmd_eval_cls(manifest, threshold, out):
    """Binary classification metrics from a detector-score manifest."""
    try:
        rows = evalharness.load_manifest(manifest)
        report = evalharness.classification_metrics([r.record for r in rows], threshold)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    payload = {
        "config": _run_config("eval-cls", {"manifest": str(manifest), "threshold": threshold}, None),
        "results": report.to_dict(),
    }
    write_report(payload, out)


@main.command("eval-loc")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None)
def cmd_eval_loc(manifest, out):
    """Localization metrics from saliency/mask pairs named in the manifest."""
    try:
        rows = evalharness.load_manifest(manifest)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    items = []
    for r in rows:
        if r.saliency_path is None or r.mask_path is None:
            raise click.UsageError(
                f"{manifest}: row {r.record.item_id} missing mask_path/saliency_path"
            )
        items.append((evalharness.load_saliency(r.saliency_path), imgcore.load_mask(r.mask_path)))
    report = evalharness.localization_metrics(items)
    payload = {
        "config": _run_config("eval-loc", {"manifest": str(manifest)}, None),
        "results": report.to_dict(),
    }
    write_report(payload, out)


@main.command("eval-strata")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--edges", default="0,0.05,0.1,0.2,0.5,1", show_default=True)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def cmd_eval_strata(manifest, edges, threshold, out):
    """Per-mask-ratio-bin classification metrics (manifest needs mask_ratio)."""
    try:
        rows = evalharness.load_manifest(manifest)
        edge_list = [float(e) for e in edges.split(",")]
    except ValueError as exc:
        raise click.UsageError(str(exc))
    pairs = []
    for r in rows:
        if r.mask_ratio is None:
            raise click.UsageError(f"{manifest}: row {r.record.item_id} missing mask_ratio")
        pairs.append((r.record, r.mask_ratio))
    try:
        strata = evalharness.stratify_by_mask_ratio(pairs, edge_list, threshold)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    payload = {
        "config": _run_config(
            "eval-strata",
            {"manifest": str(manifest), "edges": edges, "threshold": threshold},
            None,
        ),
        "results": {"strata": strata},
    }
    write_report(payload, out)


@main.command("validate-theory")
@click.option("--check", required=True, type=click.Choice(["contraction", "wavelet", "gap"]))
@click.option("--r", "factor", type=int, default=8, show_default=True)
@click.option("--mode", type=click.Choice(["box", "lowpass"]), default="box", show_default=True)
@click.option("--sigma-n", type=float, default=0.05, show_default=True)
@click.option("--mask-ratio", type=float, default=0.1, show_default=True)
@click.option("--n", type=int, default=100, show_default=True)
@click.option("--size", type=int, default=128, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def cmd_validate_theory(check, factor, mode, sigma_n, mask_ratio, n, size, seed, out):
    """Run one simulated-bottleneck theorem validator."""
    try:
        model = theoryval.NoisyImageModel(size=size, sigma_n=sigma_n, seed=seed)
        sim = theoryval.BottleneckSim(factor=factor, mode=mode)
        if check == "contraction":
            report = theoryval.check_variance_contraction(model, sim, n_images=n)
        elif check == "wavelet":
            report = theoryval.check_wavelet_decay(model, sim, n_images=n)
        else:
            report = theoryval.detectability_gap_demo(model, sim, mask_ratio=mask_ratio, n=n)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    payload = {
        "config": _run_config(
            "validate-theory",
            {"check": check, "r": factor, "mode": mode, "sigma_n": sigma_n,
             "mask_ratio": mask_ratio, "n": n, "size": size},
            seed,
        ),
        "results": report.to_dict(),
    }
    write_report(payload, out)
    if not report.passed:
        sys.exit(1)


def _parse_steps(expr: str) -> list[tuple[str, list[float]]]:
    steps = []
    if not expr.strip():
        return steps
    for token in expr.split(","):
        parts = token.strip().split(":")
        name, args = parts[0], [float(p) for p in parts[1:]]
        if name not in ("exchange", "soft-exchange", "blur", "light", "jpeg"):
            raise click.UsageError(f"unknown pipeline step {name!r}")
        steps.append((name, args))
    return steps


@main.command("pipeline")
@click.option("--manifest", required=True, type=click.Path(exists=True))
@click.option("--steps", required=True,
              help="comma list, e.g. 'exchange,jpeg:80' or 'blur:3' or 'light:120:1.5'")
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
def cmd_pipeline(manifest, steps, out_dir, seed, jobs, out):
    """Apply an ordered corruption/exchange step list per manifest row."""
    step_list = _parse_steps(steps)
    rows = load_triplet_manifest(manifest)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def process(indexed_row) -> dict:
        index, row = indexed_row
        # one independent, deterministic stream per row
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))
        try:
            img = imgcore.load_image(row.original_path)
            for name, args in step_list:
                if name == "exchange":
                    generated = imgcore.load_image(row.generated_path)
                    mask = imgcore.load_mask(row.mask_path)
                    img = imgcore.exchange(img, generated, mask)
                elif name == "soft-exchange":
                    generated = imgcore.load_image(row.generated_path)
                    mask = imgcore.load_mask(row.mask_path)
                    band = int(args[0]) if args else 2
                    kernel = int(args[1]) if len(args) > 1 else 5
                    img = imgcore.soft_exchange(img, generated, mask, band, kernel)
                elif name == "blur":
                    img = corrupt.gaussian_blur(img, args[0] if args else 3.0)
                elif name == "light":
                    radius = args[0] if args else 120.0
                    gain = args[1] if len(args) > 1 else 1.5
                    img, _ = corrupt.light_spot_random(img, radius, gain, rng)
                elif name == "jpeg":
                    img = corrupt.jpeg_compress(img, int(args[0]) if args else 80)
            dest = out_dir / f"{row.item_id}.png"
            imgcore.save_image(img, dest, format="png")
            return {"item_id": row.item_id, "status": "ok", "output": str(dest)}
        except (OSError, ValueError) as exc:
            return {"item_id": row.item_id, "status": "error", "error": str(exc)}

    with ThreadPoolExecutor(max_workers=jobs or os.cpu_count()) as pool:
        items = list(pool.map(process, enumerate(rows)))
    items.sort(key=lambda d: d["item_id"])
    n_failed = sum(1 for d in items if d["status"] != "ok")
    payload = {
        "config": _run_config(
            "pipeline", {"manifest": str(manifest), "steps": steps, "out_dir": str(out_dir)}, seed
        ),
        "results": {"items": items, "n_ok": len(items) - n_failed, "n_failed": n_failed},
    }
    write_report(payload, out)
    if n_failed:
        sys.exit(1)


@main.command("report")
@click.argument("inputs", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None)
@click.option("--csv", "csv_out", type=click.Path(), default=None,
              help="export accuracy-vs-mask-ratio rows for external plotting")
def cmd_report(inputs, out, csv_out):
    """Merge JSON reports; stratified reports with disjoint bins are unioned."""
    docs = []
    for p in inputs:
        try:
            doc = json.loads(Path(p).read_text())
        except json.JSONDecodeError as exc:
            raise click.UsageError(f"{p}: not valid JSON ({exc})")
        if "config" not in doc or "results" not in doc:
            raise click.UsageError(f"{p}: schema mismatch (need config+results)")
        docs.append(doc)
    if len(docs) == 1:
        merged = docs[0]
    else:
        subcommands = {d["config"]["subcommand"] for d in docs}
        if len(subcommands) != 1:
            raise click.UsageError(f"cannot merge reports from different subcommands: {subcommands}")
        strata = []
        for d in docs:
            if "strata" not in d["results"]:
                raise click.UsageError("only stratified reports can be merged")
            strata.extend(d["results"]["strata"])
        spans = sorted((s["lo"], s["hi"]) for s in strata)
        for (lo1, hi1), (lo2, _) in zip(spans, spans[1:]):
            if lo2 < hi1:
                raise click.UsageError(f"overlapping strata bins: ({lo1},{hi1}) and ({lo2},...)")
        params = [d["config"]["params"] for d in docs]
        shared = {k: v for k, v in params[0].items() if k not in ("manifest", "edges")}
        for p in params[1:]:
            other = {k: v for k, v in p.items() if k not in ("manifest", "edges")}
            if other != shared:
                raise click.UsageError(f"conflicting report configs: {shared} vs {other}")
        merged = {
            "config": _run_config("report", {"inputs": [str(p) for p in inputs]}, None),
            "results": {"strata": sorted(strata, key=lambda s: s["lo"])},
        }
    write_report(merged, out)
    if csv_out and "strata" in merged.get("results", {}):
        out_path = Path(csv_out)
        tmp = out_path.with_name(out_path.name + ".tmp")
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lo", "hi", "n", "acc"])
            for s in merged["results"]["strata"]:
                acc = s["report"]["acc"] if s.get("report") else ""
                writer.writerow([s["lo"], s["hi"], s["n"], acc])
        os.replace(tmp, out_path)


if __name__ == "__main__":
    main()
