"""
Collaboration between bound components: services, data pull/push and events.
"""
