"""Command-line entry points.

    randenc run --config sweep.cfg
    randenc encode --encoder borep --dim 128 --seed 1 --pooling max \\
        --embeddings vectors.txt --input sentences.txt --output embs.txt
    randenc selfcheck
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .embeddings import clean_tokens, embed_sentence, load_embeddings, tokenize
from .encoders import ConfigError, build_encoder, encode_and_pool
from .runner import ExperimentConfig, parse_encoder_spec, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randenc",
        description="Random sentence encoders with trainable probes.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a sweep described by a config file")
    run_p.add_argument("--config", required=True, help="key=value experiment config")

    enc_p = sub.add_parser("encode", help="embed sentences with one frozen encoder")
    enc_p.add_argument("--encoder", required=True,
                       help="encoder kind, optionally with hyperparameters: cnn(window=2)")
    enc_p.add_argument("--dim", required=True, type=int, help="output width D'")
    enc_p.add_argument("--seed", required=True, type=int)
    enc_p.add_argument("--pooling", required=True, choices=("max", "mean"))
    enc_p.add_argument("--embeddings", required=True, help="word vectors, GloVe text format")
    enc_p.add_argument("--input", required=True, help="one sentence per line")
    enc_p.add_argument("--output", required=True,
                       help="written as: sentence_id v1 ... vD' (17 significant digits)")
    enc_p.add_argument("--trees", help="bracketed parses, one per input line (tree_lstm)")
    enc_p.add_argument("--oov", choices=("drop", "zero"), default="drop")
    enc_p.add_argument("--clean", action="store_true",
                       help="apply the corpus cleanup rules (always on for tree_lstm)")
    enc_p.add_argument("--no-lowercase", action="store_true",
                       help="keep token case when looking up word vectors")
    enc_p.add_argument("--save-params", help="also write the encoder checkpoint here (.npz)")
    enc_p.add_argument("--load-params", help="reuse a checkpointed encoder instead of drawing")

    sub.add_parser("selfcheck", help="run the built-in invariant suite")
    return parser


def _cmd_run(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    result = run_experiment(config)
    n_err = len(result.errors)
    print(f"wrote {len(result.rows)} result rows to {config.output_dir}/results.csv")
    print(f"wrote {len(result.summary)} summary rows to {config.output_dir}/summary.csv")
    if n_err:
        print(f"{n_err} tuple(s) failed; see {config.output_dir}/errors.csv", file=sys.stderr)
        return 3
    return 0


def _cmd_encode(args) -> int:
    spec = parse_encoder_spec(args.encoder)
    table = load_embeddings(args.embeddings)
    with open(args.input, encoding="utf-8") as fh:
        sentences = [line.rstrip("\n") for line in fh]

    oov = args.oov
    clean = args.clean
    parse_list = None
    if spec.kind == "tree_lstm":
        clean = True
        if not args.trees:
            raise ConfigError("tree_lstm encoding requires --trees")
        from .trees import read_tree_file

        parse_list = read_tree_file(args.trees)
        if len(parse_list) != len(sentences):
            raise ConfigError(
                f"--trees has {len(parse_list)} parses for {len(sentences)} sentences"
            )
        oov = "zero"  # keep leaves aligned with tokens

    if args.load_params:
        from .checkpoint import load_encoder

        params = load_encoder(args.load_params)
        if params.kind != spec.kind or params.out_dim != args.dim:
            raise ConfigError(
                f"checkpoint holds {params.kind}/D'={params.out_dim}, "
                f"asked for {spec.kind}/D'={args.dim}"
            )
    else:
        params = build_encoder(spec.kind, args.seed, table.dim, args.dim, **spec.hyper_dict())
    if args.save_params:
        from .checkpoint import save_encoder

        save_encoder(args.save_params, params)

    with open(args.output, "w", encoding="utf-8") as out:
        for i, sentence in enumerate(sentences, start=1):
            tokens = tokenize(sentence, lowercase=not args.no_lowercase)
            if clean:
                tokens = clean_tokens(tokens)
            seq = embed_sentence(table, tokens, oov=oov)
            tree = parse_list[i - 1] if parse_list is not None else None
            emb = encode_and_pool(params, seq, args.pooling, tree=tree)
            out.write(" ".join([str(i)] + [f"{v:.17g}" for v in emb.values]) + "\n")
    print(f"wrote {len(sentences)} embeddings to {args.output}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "encode":
            return _cmd_encode(args)
        from .selfcheck import run_all

        failures = run_all()
        return 1 if failures else 0
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
