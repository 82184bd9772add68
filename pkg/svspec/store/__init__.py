# svspec/store/__init__.py

"""
存储层: 文件格式模型 (models)、仓储 (repository) 与输出工作单元 (unit_of_work)。
子模块按需导入, 以免与 service 层形成循环依赖。
"""
from __future__ import annotations

__all__: list[str] = ["models", "repository", "unit_of_work"]
