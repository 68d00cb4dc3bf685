"""
Indexing pipeline: gather, translate and index components, their agents and the balancing policy.
"""
