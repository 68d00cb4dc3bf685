"""
Component container: component types, contexts, lifecycle, brokering and binding.
"""
