"""
TCP backchannels between pull providers and consumers on different nodes.
"""
