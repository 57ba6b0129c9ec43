# twwclab/__init__.py
# 双向窃听信道计算实验室 模块初始化

__version__ = "0.3.0"
