"""
Developer scripts - synthetic corpus generation and benchmarks
"""
