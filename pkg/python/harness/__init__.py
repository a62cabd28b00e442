"""
harness package

Training-loop orchestration, configuration, metrics, persistence and the CLI.
学習ループ、設定、指標、永続化、CLI。
"""

__version__ = "0.1.0"
