"""
Agent layer: beliefs, plans, actuators, the container perceptor and message transports.
"""
