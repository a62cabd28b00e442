"""
run_all: one-command pipeline for imitation-learning experiments.

gen-demos → train（シードごと、必要ならアブレーション変種ごと）→ metrics を順に実行します。
"""
