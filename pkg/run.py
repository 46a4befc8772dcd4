#!/usr/bin/env python3
"""
Keyword spotting engine entry point

Usage:
    python run.py --help
    python run.py train data/train.jsonl --out model.ckws
"""
import os
import sys

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from app.api.commands import run

if __name__ == '__main__':
    sys.exit(run(sys.argv[1:]))
