"""
Command-line surface - schemas, controllers and the click command group
"""
