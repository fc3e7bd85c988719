"""
Environment settings and logging setup for difftrio
"""
import logging
import os
from pathlib import Path
from typing import Optional, Union

from dotenv import load_dotenv

from errors import ConfigurationError

load_dotenv()

# 並列数（設定ファイル・CLI より優先）
DIFFTRIO_JOBS = os.getenv("DIFFTRIO_JOBS")

# 出力先（設定ファイルに io.output_dir がない場合）
DIFFTRIO_OUTPUT_DIR = os.getenv("DIFFTRIO_OUTPUT_DIR", "./out")

DIFFTRIO_LOG_LEVEL = os.getenv("DIFFTRIO_LOG_LEVEL", "INFO")

# SVG の id を実行ごとに固定するための salt
DIFFTRIO_SVG_HASHSALT = os.getenv("DIFFTRIO_SVG_HASHSALT", "difftrio")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(level: Optional[str] = None) -> None:
    """ログ設定（1 回だけ呼ぶ）"""
    level_name = (level or DIFFTRIO_LOG_LEVEL).upper()
    if not isinstance(logging.getLevelName(level_name), int):
        raise ConfigurationError(f"unknown log level '{level_name}'")
    logging.basicConfig(level=level_name, format=LOG_FORMAT)


def resolve_jobs(cli_jobs: Optional[int] = None, config_jobs: int = 1) -> int:
    """並列数の決定: 環境変数 > CLI > 設定ファイル"""
    env = os.getenv("DIFFTRIO_JOBS", DIFFTRIO_JOBS)
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise ConfigurationError(f"DIFFTRIO_JOBS must be an integer, got {env!r}")
    elif cli_jobs is not None:
        jobs = cli_jobs
    else:
        jobs = config_jobs
    if jobs < 1:
        raise ConfigurationError(f"jobs must be >= 1, got {jobs}")
    return jobs


def init_output_dir(path: Optional[Union[str, Path]] = None) -> Path:
    """出力ディレクトリの作成"""
    out = Path(path or DIFFTRIO_OUTPUT_DIR)
    out.mkdir(parents=True, exist_ok=True)
    logging.getLogger(__name__).info("[IO] Output directory ready: %s", out)
    return out
