"""
Error types for difftrio
"""
from typing import Optional


class DifftrioError(Exception):
    """全エラーの基底クラス（detail + 終了コード）"""
    exit_code = 2

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InvalidProblemError(DifftrioError):
    """問題定義が不正"""


class ContractError(DifftrioError):
    """field と problem の組み合わせ・格子が不整合"""


class OutOfRangeError(DifftrioError):
    """時刻・区間がホライズン外"""


class DomainError(DifftrioError):
    """Chebyshev 評価点が [-1, 1] の外"""


class ConstitutiveRangeError(DifftrioError):
    """κ または ξ が正でない"""

    def __init__(self, detail: str, location: Optional[float] = None):
        super().__init__(detail)
        self.location = location


class IntegrationError(DifftrioError):
    """右辺が非有限値を返した"""

    def __init__(self, detail: str, t: Optional[float] = None):
        super().__init__(detail)
        self.t = t


class StiffnessError(IntegrationError):
    """ステップ幅がアンダーフロー"""


class StiffSolveError(IntegrationError):
    """Newton 反復が収束しない"""


class StabilityError(DifftrioError):
    """陽的 Euler の CFL 条件違反"""


class UndefinedScdError(DifftrioError):
    """参照解がゼロのため scd が定義できない"""


class LocationError(DifftrioError):
    """流束の評価位置が格子上にない"""


class OracleDivergenceError(DifftrioError):
    """2 手法の参照解が一致しない（参照解は採用しない）"""

    def __init__(self, detail: str, certificate=None):
        super().__init__(detail)
        self.certificate = certificate


class ConfigurationError(DifftrioError):
    """設定ファイル・ソルバーパラメータの誤り"""
    exit_code = 1


class IngestionError(DifftrioError):
    """境界条件 CSV の読み込みエラー"""
    exit_code = 1

    def __init__(self, detail: str, row: Optional[int] = None):
        if row is not None:
            detail = f"row {row}: {detail}"
        super().__init__(detail)
        self.row = row
