"""Report tables of fitted models and feature matrices
"""
