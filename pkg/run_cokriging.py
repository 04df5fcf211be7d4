# run_cokriging.py
# Runner for the co-Kriging toolkit (same as `python -m av_cokriging`).
#
# Usage:
#   python run_cokriging.py fit builtin:exp1 --out model_1d.json
#   python run_cokriging.py reproduce exp1 --seed 7
from av_cokriging.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
