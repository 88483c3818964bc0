"""Parse and write event and session files
"""
