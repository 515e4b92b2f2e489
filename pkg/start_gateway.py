"""
启动脚本
用于启动单类推荐工具包的 HTTP 网关
"""

import argparse
import asyncio
import os
import sys

# 添加项目路径到Python路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))


async def start_gateway(host: str, port: int):
    """启动工具网关"""
    print("Starting toolkit gateway...")

    from oneclass_rec.gateway import ToolkitGateway

    await ToolkitGateway().start_server(host=host, port=port)


def main():
    """主函数"""
    from oneclass_rec.cli import setup_logging

    parser = argparse.ArgumentParser(description="One-class recommendation toolkit gateway")
    parser.add_argument("--host", default=os.environ.get("ONECLASS_REC_HOST", "0.0.0.0"))
    parser.add_argument("--port", type=int, default=int(os.environ.get("ONECLASS_REC_PORT", "8088")))
    args = parser.parse_args()
    setup_logging()

    print("One-class Recommendation Toolkit - Starting Gateway")
    print("=" * 50)
    try:
        asyncio.run(start_gateway(args.host, args.port))
    except KeyboardInterrupt:
        print("\nGateway stopped.")


if __name__ == "__main__":
    main()
