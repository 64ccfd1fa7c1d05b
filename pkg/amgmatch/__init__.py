"""Provide coarsening based on compatible weighted matching for aggregation
AMG, together with the tools to measure the quality of the aggregates and to
run the test problems that exercise it.
"""
