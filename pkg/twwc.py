import sys
from typing import Optional, Sequence

# --- 导入实验室组件 ---
from twwclab import cli


def run_once(argv: Optional[Sequence[str]] = None) -> int:
    """
    执行一条实验命令（region / exponent / simulate / verify-* / fm），不初始化日志。

    :param argv: 命令行参数，缺省取 sys.argv[1:]。
    :return: 退出码。
    """
    return cli.run_once(sys.argv[1:] if argv is None else argv)


def main():
    """初始化日志后执行一次命令，以退出码结束进程。"""
    cli.main()


if __name__ == "__main__":
    main()
