# svspec/api/commands/__init__.py
