"""Regenerate the bundled template library data file."""

from pathlib import Path

from corpusqa.template_bank import build_bank
from corpusqa.templates import save_library


def main() -> None:
    bank = build_bank()
    target = Path(__file__).resolve().parents[1] / "src" / "corpusqa" / "data" / "templates.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    save_library(bank, target)
    print(f"wrote {len(bank)} templates to {target}")


if __name__ == "__main__":
    main()
