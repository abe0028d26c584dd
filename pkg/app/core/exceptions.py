"""
自定义异常类
"""

from typing import Optional


class KahlerLabException(Exception):
    """数值实验室基础异常"""

    def __init__(self, message: str, code: str = "GENERAL_ERROR"):
        self.message = message
        self.code = code
        super().__init__(self.message)


class GeometryException(KahlerLabException):
    """几何计算异常"""

    def __init__(self, message: str = "几何计算失败"):
        super().__init__(message, "GEOMETRY_ERROR")


class ProfileValidationException(KahlerLabException):
    """动量剖面不合法"""

    def __init__(self, message: str = "动量剖面不满足容许条件"):
        super().__init__(message, "PROFILE_INVALID")


class PositivityException(KahlerLabException):
    """正性检验异常"""

    def __init__(self, message: str = "曲率张量正性检验失败"):
        super().__init__(message, "POSITIVITY_ERROR")


class SpectralException(KahlerLabException):
    """谱计算异常"""

    def __init__(self, message: str = "特征值计算失败"):
        super().__init__(message, "SPECTRAL_ERROR")


class FlowHaltException(KahlerLabException):
    """流演化数值中止（正性丢失）"""

    def __init__(
        self,
        message: str = "流演化中止：剖面正性丢失",
        tau: Optional[float] = None,
        step: Optional[int] = None,
    ):
        self.tau = tau
        self.step = step
        if tau is not None and step is not None:
            message = f"{message} (tau={tau:.6g}, step={step})"
        super().__init__(message, "NUMERICAL_HALT")


class CFLViolationException(KahlerLabException):
    """时间步长违反CFL约束"""

    def __init__(self, message: str = "时间步长违反CFL约束"):
        super().__init__(message, "CFL_VIOLATION")


class ConfigurationException(KahlerLabException):
    """配置错误异常"""

    def __init__(self, message: str = "配置错误"):
        super().__init__(message, "CONFIGURATION_ERROR")


class FixtureFormatException(KahlerLabException):
    """数据文件格式错误"""

    def __init__(self, message: str = "数据文件格式错误"):
        super().__init__(message, "FIXTURE_FORMAT_ERROR")


class FunctionalException(KahlerLabException):
    """泛函计算异常"""

    def __init__(self, message: str = "泛函计算失败"):
        super().__init__(message, "FUNCTIONAL_ERROR")


class InsufficientSamplesException(KahlerLabException):
    """样本数量不足"""

    def __init__(self, message: str = "时间序列样本数量不足"):
        super().__init__(message, "INSUFFICIENT_SAMPLES")


# 退出码映射
def exception_to_exit_code(exc: BaseException) -> int:
    """将异常转换为命令行退出码"""

    exit_code_mapping = {
        "CONFIGURATION_ERROR": 2,
        "FIXTURE_FORMAT_ERROR": 2,
        "PROFILE_INVALID": 2,
        "CFL_VIOLATION": 2,
        "NUMERICAL_HALT": 3,
    }

    if isinstance(exc, KahlerLabException):
        return exit_code_mapping.get(exc.code, 1)
    return 1
