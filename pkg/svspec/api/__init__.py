# svspec/api/__init__.py
"""命令行层: 子命令、报告模型与错误到退出码的映射."""
