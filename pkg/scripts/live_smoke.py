"""Ground and plan one instance against a real endpoint. Not part of the test suite.

Usage: SYMBOLIZER_API_KEY=... python3 scripts/live_smoke.py [--endpoint URL] [--model NAME] [--domain D] [--size N]
"""

import argparse
import sys
import tempfile

from symbolizer.errors import SymbolizerError
from symbolizer.eval import PlanningConfig, evaluate_grounding, evaluate_planning
from symbolizer.grounder import ChatClient, GrounderConfig, VLMGrounder
from symbolizer.simulator import make_instance


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--endpoint", default=GrounderConfig.endpoint)
    ap.add_argument("--model", default=GrounderConfig.model)
    ap.add_argument("--domain", default="blocksworld")
    ap.add_argument("--size", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cfg = GrounderConfig(endpoint=args.endpoint, model=args.model, cache_dir=tempfile.mkdtemp(prefix="symbolizer-"))
    try:
        client = ChatClient.from_config(cfg)
    except SymbolizerError as exc:
        print(exc, file=sys.stderr)
        return 3
    inst = make_instance(args.domain, args.size, args.seed)
    factory = lambda _: VLMGrounder(client)  # noqa: E731
    print(evaluate_grounding([inst], factory).to_markdown())
    print(evaluate_planning([inst], "model-free", factory, PlanningConfig()).to_markdown())
    print(f"network calls: {client.network_calls}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
