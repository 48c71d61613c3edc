"""Command-line pipeline: gen-data / train / reconstruct / eval / pipeline / sweep.

Every run writes the fully resolved configuration next to its outputs so
results are auditable and bit-reproducible from the echoed file. Exit codes:
0 success, 2 bad configuration or arguments, 3 missing or malformed file,
4 empty reconstruction, 1 unexpected failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .assembly import AssemblyConfig, reconstruct
from .config import PipelineConfig
from .geometry import normalize_cloud
from .labels import (
    build_training_set,
    load_training_set,
    merge_training_sets,
    save_training_set,
)
from .meshio import MeshParseError, load_cloud, load_mesh, save_cloud, save_mesh
from .metrics import evaluate
from .network import (
    Architecture,
    TrainConfig,
    load_checkpoint,
    predict_batch,
    save_checkpoint,
    train,
)
from .shapes import ShapeSpec, generate_shape

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_EMPTY = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgemesh",
        description="Mesh reconstruction from sparse point clouds via edge prediction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None)

    def add_shape(p):
        p.add_argument("--shape", default=None, help="sphere | torus | box | cylinder | file")
        p.add_argument("--shape-params", default=None,
                       help='JSON object of shape parameters, e.g. \'{"minor_radius": 0.25}\'')
        p.add_argument("--points", type=int, default=None, help="cloud sample count")

    def add_pipeline_knobs(p):
        p.add_argument("--k", type=int, default=None, dest="k_neighbors",
                       help="candidate neighbors per vertex")
        p.add_argument("--n", type=int, default=None, dest="patch_size",
                       help="neighborhood size per edge")
        p.add_argument("--no-canonical-embedding", action="store_true",
                       help="ablation: raw midpoint-centered coordinates")

    def add_train_knobs(p):
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--lr", type=float, default=None, dest="learning_rate")
        p.add_argument("--batch-size", type=int, default=None)
        p.add_argument("--max-train-samples", type=int, default=None)
        p.add_argument("--train-seed", type=int, default=None)

    def add_assembly_knobs(p):
        p.add_argument("--dth", type=float, default=None, dest="distance_threshold",
                       help="edge filtering threshold")
        p.add_argument("--length-factor", type=float, default=None)
        p.add_argument("--ring-max", type=int, default=None)

    def add_eval_knobs(p):
        p.add_argument("--samples", type=int, default=None, dest="eval_samples")
        p.add_argument("--tau", type=float, default=None, help="F-score match threshold")
        p.add_argument("--eval-seed", type=int, default=None)

    p = sub.add_parser("gen-data", help="generate a shape, cloud, and training records")
    add_common(p)
    add_shape(p)
    add_pipeline_knobs(p)

    p = sub.add_parser("train", help="train a regressor from training records")
    add_common(p)
    add_train_knobs(p)
    p.add_argument("--data", nargs="+", required=True, help="training .npz file(s)")

    p = sub.add_parser("reconstruct", help="turn a cloud into a mesh with a trained model")
    add_common(p)
    add_assembly_knobs(p)
    p.add_argument("--cloud", required=True, help="input cloud (.xyz/.obj/.ply)")
    p.add_argument("--model", required=True, help="trained checkpoint (.npz)")
    p.add_argument("--normalize", action="store_true",
                   help="normalize the cloud to the unit cube before reconstructing")

    p = sub.add_parser("eval", help="compare a reconstruction against a reference mesh")
    add_common(p)
    add_eval_knobs(p)
    p.add_argument("--recon", required=True, help="reconstructed mesh file")
    p.add_argument("--gt", required=True, help="reference mesh file")

    p = sub.add_parser("pipeline", help="gen-data + train + reconstruct + eval in one run")
    add_common(p)
    add_shape(p)
    add_pipeline_knobs(p)
    add_train_knobs(p)
    add_assembly_knobs(p)
    add_eval_knobs(p)

    p = sub.add_parser("sweep", help="density ablation over several cloud sizes")
    add_common(p)
    add_shape(p)
    add_pipeline_knobs(p)
    add_train_knobs(p)
    add_assembly_knobs(p)
    add_eval_knobs(p)
    p.add_argument("--model", default=None,
                   help="reuse a trained checkpoint instead of training one")
    p.add_argument("--density", default="250,500,1000,2000",
                   help="comma-separated cloud sizes")
    return parser


def _resolve_config(args) -> PipelineConfig:
    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    overrides = {}
    for key in PipelineConfig.field_names():
        if hasattr(args, key) and getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    if getattr(args, "shape_params", None) is not None:
        parsed = json.loads(args.shape_params)
        if not isinstance(parsed, dict):
            raise ValueError("--shape-params must be a JSON object")
        overrides["shape_params"] = parsed
    if getattr(args, "no_canonical_embedding", False):
        overrides["canonical"] = False
    return config.override(**overrides)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _spec_from_config(config: PipelineConfig, points: int | None = None) -> ShapeSpec:
    return ShapeSpec(
        kind=config.shape,
        sample_count=points if points is not None else config.points,
        seed=config.seed,
        params=config.shape_params or {},
    )


def _train_from_sets(dataset, config: PipelineConfig):
    arch = Architecture(
        input_dim=dataset.dim,
        feature_widths=config.resolved_feature_widths(),
        head_widths=config.resolved_head_widths(),
    )
    train_config = TrainConfig(
        learning_rate=config.learning_rate,
        lr_decay=config.lr_decay,
        milestones=None if config.milestones is None else tuple(config.milestones),
        batch_size=config.batch_size,
        epochs=config.epochs,
        seed=config.train_seed,
    )
    return train(dataset, train_config, arch=arch)


def _write_loss_curve(history, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch\tloss\n")
        for epoch, loss in enumerate(history):
            fh.write(f"{epoch}\t{loss:.10e}\n")


def _reconstruct_with_params(cloud, params, header, config: PipelineConfig):
    assembly = AssemblyConfig(
        distance_threshold=config.distance_threshold,
        length_factor=config.length_factor,
        ring_max=config.ring_max,
        circumball_filter=config.circumball_filter,
    )

    def scorer(edges, emb, emb_sym):
        return predict_batch(params, emb, emb_sym)

    return reconstruct(
        cloud,
        scorer,
        assembly,
        k_neighbors=int(header.get("k_neighbors", config.k_neighbors)),
        patch_size=int(header.get("patch_size", config.patch_size)),
        canonical=bool(header.get("canonical", config.canonical)),
    )


def cmd_gen_data(args) -> int:
    config = _resolve_config(args)
    out = _out_dir(args)
    mesh, cloud = generate_shape(_spec_from_config(config))
    dataset = build_training_set(
        cloud,
        mesh,
        k=config.k_neighbors,
        n=config.patch_size,
        canonical=config.canonical,
        edge_sample_count=config.edge_samples,
        meta={"shape": config.shape, "seed": config.seed},
    )
    save_mesh(mesh, out / "gt_mesh.obj")
    save_cloud(cloud, out / "cloud.xyz")
    save_training_set(dataset, out / "train.npz")
    config.write(out / "config.json")
    print(f"wrote {out}/gt_mesh.obj, cloud.xyz, train.npz ({len(dataset)} samples)")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _resolve_config(args)
    out = _out_dir(args)
    sets = [load_training_set(p) for p in args.data]
    dataset = merge_training_sets(sets) if len(sets) > 1 else sets[0]
    if config.max_train_samples is not None:
        dataset = dataset.subsample(config.max_train_samples, seed=config.train_seed)

    params, history = _train_from_sets(dataset, config)

    first_meta = sets[0].meta
    source = first_meta.get("sources", [first_meta])[0] if "sources" in first_meta else first_meta
    save_checkpoint(
        params,
        out / "model.npz",
        meta={
            "k_neighbors": source.get("k", config.k_neighbors),
            "patch_size": source.get("n", config.patch_size),
            "canonical": source.get("canonical", config.canonical),
            "train_seed": config.train_seed,
            "train_samples": len(dataset),
            "coordinate_note": "unit-cube-normalized cloud coordinates",
        },
    )
    _write_loss_curve(history, out / "loss_curve.txt")
    config.write(out / "config.json")
    print(f"trained on {len(dataset)} samples; "
          f"loss {history[0]:.3e} -> {history[-1]:.3e}; wrote {out}/model.npz")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    config = _resolve_config(args)
    out = _out_dir(args)
    cloud = load_cloud(args.cloud)
    if args.normalize:
        cloud, _ = normalize_cloud(cloud)
    params, header = load_checkpoint(Path(args.model))
    mesh, diag = _reconstruct_with_params(cloud, params, header, config)
    save_mesh(mesh, out / "mesh.obj")
    (out / "diagnostics.json").write_text(
        json.dumps(diag.as_dict(), indent=2) + "\n", encoding="utf-8"
    )
    config.write(out / "config.json")
    if mesh.n_faces == 0:
        print("reconstruction is empty: no edges survived filtering", file=sys.stderr)
        return EXIT_EMPTY
    print(f"reconstructed {mesh.n_faces} faces over {mesh.n_vertices} points -> {out}/mesh.obj")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _resolve_config(args)
    out = _out_dir(args)
    recon = load_mesh(args.recon)
    gt = load_mesh(args.gt)
    if recon.n_faces == 0:
        print("cannot evaluate an empty reconstruction", file=sys.stderr)
        return EXIT_EMPTY
    report = evaluate(recon, gt, count=config.eval_samples, tau=config.tau, seed=config.eval_seed)
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    config.write(out / "config.json")
    print("l1_cd\tl2_cd\tf_score\tnormal_consistency")
    print(report.summary_line())
    return EXIT_OK


def cmd_pipeline(args) -> int:
    config = _resolve_config(args)
    out = _out_dir(args)
    mesh, cloud = generate_shape(_spec_from_config(config))
    save_mesh(mesh, out / "gt_mesh.obj")
    save_cloud(cloud, out / "cloud.xyz")

    dataset = build_training_set(
        cloud, mesh, k=config.k_neighbors, n=config.patch_size,
        canonical=config.canonical, edge_sample_count=config.edge_samples,
        meta={"shape": config.shape, "seed": config.seed},
    )
    save_training_set(dataset, out / "train.npz")
    if config.max_train_samples is not None:
        dataset = dataset.subsample(config.max_train_samples, seed=config.train_seed)
    params, history = _train_from_sets(dataset, config)
    save_checkpoint(
        params, out / "model.npz",
        meta={"k_neighbors": config.k_neighbors, "patch_size": config.patch_size,
              "canonical": config.canonical, "train_seed": config.train_seed},
    )
    _write_loss_curve(history, out / "loss_curve.txt")

    header = {"k_neighbors": config.k_neighbors, "patch_size": config.patch_size,
              "canonical": config.canonical}
    recon_mesh, diag = _reconstruct_with_params(cloud, params, header, config)
    save_mesh(recon_mesh, out / "mesh.obj")
    (out / "diagnostics.json").write_text(
        json.dumps(diag.as_dict(), indent=2) + "\n", encoding="utf-8"
    )
    config.write(out / "config.json")
    if recon_mesh.n_faces == 0:
        print("reconstruction is empty: no edges survived filtering", file=sys.stderr)
        return EXIT_EMPTY

    report = evaluate(recon_mesh, mesh, count=config.eval_samples, tau=config.tau,
                      seed=config.eval_seed)
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    print("l1_cd\tl2_cd\tf_score\tnormal_consistency")
    print(report.summary_line())
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _resolve_config(args)
    out = _out_dir(args)
    densities = [int(x) for x in args.density.split(",") if x]
    if not densities:
        raise ValueError("--density must list at least one cloud size")

    if args.model:
        params, header = load_checkpoint(Path(args.model))
    else:
        # one model for the whole sweep: mixed densities of sphere + torus
        sets = []
        for shape in ("sphere", "torus"):
            for density in densities:
                mesh, cloud = generate_shape(
                    ShapeSpec(kind=shape, sample_count=density, seed=config.seed)
                )
                sets.append(
                    build_training_set(
                        cloud, mesh, k=config.k_neighbors, n=config.patch_size,
                        canonical=config.canonical, meta={"shape": shape, "points": density},
                    )
                )
        dataset = merge_training_sets(sets)
        if config.max_train_samples is not None:
            dataset = dataset.subsample(config.max_train_samples, seed=config.train_seed)
        params, history = _train_from_sets(dataset, config)
        save_checkpoint(
            params, out / "model.npz",
            meta={"k_neighbors": config.k_neighbors, "patch_size": config.patch_size,
                  "canonical": config.canonical, "train_seed": config.train_seed},
        )
        _write_loss_curve(history, out / "loss_curve.txt")
        header = {"k_neighbors": config.k_neighbors, "patch_size": config.patch_size,
                  "canonical": config.canonical}

    rows = []
    print("points\tl1_cd\tl2_cd\tf_score\tnormal_consistency")
    for density in densities:
        mesh, cloud = generate_shape(_spec_from_config(config, points=density))
        recon_mesh, diag = _reconstruct_with_params(cloud, params, header, config)
        if recon_mesh.n_faces == 0:
            print(f"{density}: reconstruction is empty", file=sys.stderr)
            return EXIT_EMPTY
        report = evaluate(recon_mesh, mesh, count=config.eval_samples, tau=config.tau,
                          seed=config.eval_seed)
        save_mesh(recon_mesh, out / f"mesh_{density}.obj")
        rows.append({"points": density, **report.as_dict()})
        print(f"{density}\t{report.summary_line()}")

    (out / "sweep.json").write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    config.write(out / "config.json")
    return EXIT_OK


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "reconstruct": cmd_reconstruct,
    "eval": cmd_eval,
    "pipeline": cmd_pipeline,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc}", file=sys.stderr)
        return EXIT_IO
    except MeshParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"error: bad configuration or input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
