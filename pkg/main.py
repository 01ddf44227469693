#!/usr/bin/env python3
"""
Gap-Acceptance Queue Toolkit - Main Entry Point
Delays of minor-road drivers at priority intersections with platooned major-road traffic

Usage:
    python main.py analyze  --config configs/example1.json
    python main.py table1   --config configs/example1.json --out results/
    python main.py sweep    --config configs/example2.json --jobs 4
    python main.py simulate --config configs/example1.json --seed 7 --replications 20
    python main.py approx   --config configs/example3.json
    python main.py --test          # Run production smoke tests
"""

import sys
from pathlib import Path

# Make `src` and `tests` importable when run from anywhere
sys.path.insert(0, str(Path(__file__).parent))


def main():
    """Main entry point for the gap-acceptance queue toolkit"""
    try:
        from src.core.toolkit import main as toolkit_main
    except ImportError as e:
        print(f"❌ Error importing modules: {e}")
        print("Please ensure all dependencies are installed: pip install -r requirements.txt")
        sys.exit(1)
    sys.exit(toolkit_main())


if __name__ == "__main__":
    main()
