"""
Benchmark harness: synthetic corpora, multi-process runs and comparison reports.
"""
