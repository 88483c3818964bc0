"""Load, parse, and generate the log data of a cohort
"""
