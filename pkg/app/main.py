from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from app.commands import command_names, dispatch
from app.core.config_loader import load_experiment_config
from app.core.errors import ConfigError, CorpusFormatError, NonFiniteLossError

logger = logging.getLogger("app")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _on_off(value: str) -> bool:
    v = value.lower().strip()
    if v in ("on", "true", "1", "yes"):
        return True
    if v in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"esperado on/off, recebido '{value}'")


def _common_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("execução")
    g.add_argument("--config", help="arquivo de configuração (padrão: db/experiment_config.json)")
    g.add_argument("--profile", default="toy", help="perfil do arquivo de configuração (toy, paper)")
    g.add_argument("--seed", type=int, help="semente única de toda a aleatoriedade")
    g.add_argument("--out", help="diretório de saída")
    g.add_argument("--workers", type=int, help="processos para decodificação/avaliação")
    g.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    g.add_argument("--quiet", action="store_true", help="sem barras de progresso")

    g = p.add_argument_group("entradas")
    g.add_argument("--corpus", help="corpus JSON Lines")
    g.add_argument("--vocab", help="arquivo de vocabulário (um token por linha)")
    g.add_argument("--checkpoint", help="checkpoint do modelo")
    g.add_argument("--validation", help="corpus de validação (train)")
    g.add_argument("--baseline-checkpoint", help="checkpoint baseline para warm start (train)")
    g.add_argument("--distractors", help="corpus fora do domínio (adversarial)")
    g.add_argument("--decoded", help="saídas decodificadas JSON Lines (evaluate)")
    g.add_argument("--inputs", nargs="+", help="CSVs de métricas/sweep (report)")
    g.add_argument("--n", type=int, help="número de frases do lead (baseline-lead)")
    g.add_argument("--max-entries", type=int, default=40, help="entradas checadas por tensor (gradcheck)")

    g = p.add_argument_group("modelo e decodificação")
    g.add_argument("--decoder-mode", choices=["shared", "separate", "baseline"])
    g.add_argument("--heads", type=int)
    g.add_argument("--dual-attention", type=_on_off, metavar="on|off")
    g.add_argument("--alpha", type=float, help="peso da perda do resumo")
    g.add_argument("--beam-B", dest="beam_B", type=int)
    g.add_argument("--beam-K", dest="beam_K", type=int)
    g.add_argument("--beam-N", dest="beam_N", type=int)
    g.add_argument("--beam-R", dest="beam_R", type=int)
    g.add_argument("--rerank-alpha", type=float)
    g.add_argument("--rerank-beta", type=float)
    g.add_argument("--rerank-alpha-prime", type=float)
    g.add_argument("--semantic-source", choices=["generated", "gold"])
    g.add_argument("--n-insert", type=int, help="restringe o sweep a n ∈ {0, N}")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m app.main",
        description="Sumarização abstrativa guiada por papéis semânticos (SRL): pipeline em lote.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMANDO", required=True)
    common = _common_options()
    helps = {
        "toy-corpus": "gera o corpus toy (50 amostras) e o corpus de distratores",
        "preprocess": "normaliza e filtra o corpus; gera o vocabulário",
        "targets": "seleciona até 5 estruturas SRL por amostra",
        "train": "treina o modelo em estágios",
        "decode": "decodifica semântica + resumo com reranking",
        "evaluate": "ROUGE, densidade, redundância e estatísticas de SRL",
        "adversarial": "corpora com frases inseridas e curva ROUGE-L por n",
        "baseline-lead": "resumo com as primeiras N frases",
        "report": "agrega CSVs em dados prontos para gráfico",
        "gradcheck": "verificação de gradiente por diferenças finitas",
    }
    for name in command_names():
        sub.add_parser(name, parents=[common], help=helps.get(name, ""))
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    ov: Dict[str, Any] = {
        "seed": args.seed,
        "workers": args.workers,
        "summarizer": {
            "decoder_mode": args.decoder_mode,
            "heads": args.heads,
            "dual_attention": args.dual_attention,
            "alpha": args.alpha,
        },
        "beam": {
            "B": args.beam_B,
            "K": args.beam_K,
            "N": args.beam_N,
            "R": args.beam_R,
            "alpha": args.rerank_alpha,
            "beta": args.rerank_beta,
            "alpha_prime": args.rerank_alpha_prime,
            "semantic_source": args.semantic_source,
        },
    }
    if args.n_insert is not None:
        ov["adversarial"] = {"n_values": [0, args.n_insert]}
    return ov


def run(argv: Optional[List[str]] = None) -> int:
    """Executa um subcomando. 0 = sucesso, 1 = falha de entrada/execução, 2 = uso incorreto."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0

    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT, stream=sys.stderr, force=True)
    try:
        cfg = load_experiment_config(args.config, args.profile, _overrides(args))
        return dispatch(args.command, args, cfg)
    except (ConfigError, CorpusFormatError, NonFiniteLossError, ValueError, OSError) as exc:
        logger.error("%s: %s", args.command, exc)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
