#!/usr/bin/env python3
"""
Regenerate glass_miner/data/molar_masses.tsv from the oxide lexicon.

Every canonical lexicon formula gets its molar mass computed from the
standard atomic weights in glass_miner.basis, rounded to 3 decimals.

Examples:
  python scripts/build_molar_masses.py
  python scripts/build_molar_masses.py --lexicon my_oxides.txt --output masses.tsv
"""

import argparse
import logging
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from glass_miner.basis import formula_molar_mass
from glass_miner.exceptions import MinerError
from glass_miner.lexicon import CompoundLexicon
from glass_miner.resources import DEFAULT_LEXICON, DEFAULT_MOLAR_MASSES

HEADER = "# formula\tmolar mass [g/mol], from standard atomic weights (scripts/build_molar_masses.py)\n"


def main():
    p = argparse.ArgumentParser(description="Build the molar-mass table of the oxide lexicon")
    p.add_argument("--lexicon", default=str(DEFAULT_LEXICON), help="Lexicon file")
    p.add_argument("--output", default=str(DEFAULT_MOLAR_MASSES), help="Output TSV")
    args = p.parse_args()

    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    try:
        lexicon = CompoundLexicon.from_file(Path(args.lexicon))
        lines = [f"{formula}\t{formula_molar_mass(formula):.3f}\n" for formula in lexicon]
    except MinerError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1

    with open(args.output, "w", encoding="utf-8") as f:
        f.write(HEADER)
        f.writelines(lines)
    print(f"Wrote {len(lines)} molar masses to {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
