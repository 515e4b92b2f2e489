"""
HTTP 工具网关
把命令行子命令注册为工具，通过 FastAPI 暴露，并登记每次运行
"""

import asyncio
import logging
from typing import Any, Dict, List

import psutil
import uvicorn
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from .base import BaseToolServer, RunRegistry, ToolkitError, ToolSpec
from .cli import execute
from .encoder import Mapping
from .evaluation import USER_MODES

logger = logging.getLogger(__name__)

RUN_OUTPUT_SCHEMA = {
    "type": "object",
    "properties": {
        "exit_code": {"type": "integer"},
        "run_id": {"type": "string"},
        "manifest": {"type": "object"},
    },
}


def _schema(properties: Dict[str, Any], required: List[str] = ()) -> Dict[str, Any]:
    return {"type": "object", "properties": properties, "required": list(required)}


def arguments_to_argv(command: str, arguments: Dict[str, Any]) -> List[str]:
    """{"margin_p": 0.1, "k": [5, 10], "train": true} → ["--margin-p", "0.1", "--k", "5", "--k", "10", "--train"]"""
    argv = [command]
    for key, value in arguments.items():
        flag = "--" + key.replace("_", "-")
        if value is None or value is False:
            continue
        if value is True:
            argv.append(flag)
        elif isinstance(value, (list, tuple)):
            for item in value:
                argv += [flag, str(item)]
        else:
            argv += [flag, str(value)]
    return argv


class ToolkitServer(BaseToolServer):
    """工具包服务器：每个工具对应一个子命令"""

    def __init__(self, registry: RunRegistry = None):
        super().__init__("oneclass_rec", "1.0.0")
        self.registry = registry or RunRegistry()
        self._register_tools()

    def _register_tools(self):
        data_props = {"data": {"type": "string"}, "format": {"type": "string", "enum": ["pair-list", "matrix-rows"]}}
        tools = [
            ToolSpec(
                name="prepare",
                description="构建暖启动（留一法）或冷启动划分",
                input_schema=_schema({
                    **data_props,
                    "kind": {"type": "string", "enum": ["warm", "cold"]},
                    "candidates": {"type": "integer"},
                    "seed": {"type": "integer"},
                    "out_dir": {"type": "string"},
                }, ["data"]),
                output_schema=RUN_OUTPUT_SCHEMA,
            ),
            ToolSpec(
                name="train",
                description="仅用相似对训练用户/物品表示",
                input_schema=_schema({
                    **data_props,
                    "split": {"type": "string"},
                    "dim": {"type": "integer"},
                    "batch": {"type": "integer"},
                    "lr": {"type": "number"},
                    "epochs": {"type": "integer"},
                    "lambda1": {"type": "number"},
                    "lambda2": {"type": "number"},
                    "lambda3": {"type": "number"},
                    "margin_p": {"type": "number"},
                    "base": {"type": "string"},
                    "ablate": {"type": "string"},
                    "pair_fraction": {"type": "number"},
                    "seed": {"type": "integer"},
                    "out_dir": {"type": "string"},
                }, ["data"]),
                output_schema=RUN_OUTPUT_SCHEMA,
            ),
            ToolSpec(
                name="eval",
                description="在检查点上计算 HR@K / recall@K",
                input_schema=_schema({
                    **data_props,
                    "split": {"type": "string"},
                    "checkpoint": {"type": "string"},
                    "k": {"type": "array", "items": {"type": "integer"}},
                    "mapping": {"type": "string", "enum": [m.value for m in Mapping]},
                    "user_mode": {"type": "string", "enum": list(USER_MODES)},
                    "results": {"type": "string"},
                    "out_dir": {"type": "string"},
                }, ["data", "split", "checkpoint"]),
                output_schema=RUN_OUTPUT_SCHEMA,
            ),
            ToolSpec(
                name="diagnose",
                description="检查点的坍塌诊断报告",
                input_schema=_schema({"checkpoint": {"type": "string"}, "out_dir": {"type": "string"}}, ["checkpoint"]),
                output_schema=RUN_OUTPUT_SCHEMA,
            ),
            ToolSpec(
                name="synth",
                description="合成连通分量数据与消融实验",
                input_schema=_schema({
                    "components": {"type": "integer", "minimum": 1},
                    "head_edge_prob": {"type": "number"},
                    "ablate": {"type": "array", "items": {"type": "string"}},
                    "train": {"type": "boolean"},
                    "epochs": {"type": "integer"},
                    "repeats": {"type": "integer", "minimum": 1},
                    "seed": {"type": "integer"},
                    "out_dir": {"type": "string"},
                }),
                output_schema=RUN_OUTPUT_SCHEMA,
            ),
            ToolSpec(
                name="gradcheck",
                description="各损失项解析梯度的中心差分校验",
                input_schema=_schema({
                    "dim": {"type": "integer"},
                    "seed": {"type": "integer"},
                    "eps": {"type": "number"},
                }),
                output_schema=RUN_OUTPUT_SCHEMA,
            ),
        ]
        for tool in tools:
            self.register_tool(tool)

    async def call_tool(self, name: str, arguments: Dict) -> Dict:
        if name not in self.tools:
            raise ToolkitError(f"Unknown tool: {name}", code=404)
        argv = arguments_to_argv(name, arguments)
        exit_code, manifest = await asyncio.to_thread(execute, argv)
        run_id = manifest.run_id if manifest is not None else f"{name}-unrecorded"
        self.registry.register_run(
            run_id, name, manifest.artifacts.get("manifest") if manifest is not None else None, exit_code
        )
        return {
            "exit_code": exit_code,
            "run_id": run_id,
            "manifest": manifest.to_dict() if manifest is not None else None,
        }


class ToolkitGateway:
    """网关：FastAPI 路由到工具包服务器"""

    def __init__(self, server: ToolkitServer = None):
        self.server = server or ToolkitServer()
        self.app = FastAPI(title="One-class Recommendation Toolkit Gateway", version="1.0.0")
        self._setup_routes()
        self._setup_cors()

    def _setup_cors(self):
        self.app.add_middleware(
            CORSMiddleware,
            allow_origins=["*"],
            allow_credentials=True,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def _setup_routes(self):
        server = self.server

        @self.app.get("/")
        async def root():
            return {
                "message": "One-class Recommendation Toolkit Gateway",
                "version": server.version,
                "available_tools": list(server.tools.keys()),
            }

        @self.app.get("/tools")
        async def list_tools():
            """列出所有工具"""
            reply = await server.handle_request({"method": "tools/list"})
            return reply["result"]

        @self.app.post("/tools/{tool_name}")
        async def call_tool(tool_name: str, request_data: dict):
            """调用工具"""
            reply = await server.handle_request(
                {"method": "tools/call", "params": {"name": tool_name, "arguments": request_data}}
            )
            if "error" in reply:
                error = reply["error"]
                logger.error(f"Tool {tool_name} failed: {error['message']}")
                raise HTTPException(status_code=error["code"], detail=error)
            result = reply["result"]
            return {"success": result["exit_code"] == 0, "result": result, "tool": tool_name}

        @self.app.post("/rpc")
        async def rpc(request_data: dict):
            """JSON 请求直通：initialize / tools/list / tools/call"""
            return await server.handle_request(request_data)

        @self.app.get("/runs")
        async def list_runs(command: str = None):
            return {"runs": server.registry.discover_runs([command] if command else None)}

        @self.app.get("/runs/{run_id}")
        async def get_run(run_id: str):
            run = server.registry.get_run(run_id)
            if run is None:
                raise HTTPException(status_code=404, detail=f"Run {run_id} not found")
            return run

        @self.app.get("/health")
        async def health_check():
            """健康检查"""
            memory = psutil.Process().memory_info()
            return {
                "status": "healthy",
                "tools_count": len(server.tools),
                "runs_count": len(server.registry.runs),
                "rss_mb": round(memory.rss / 2 ** 20, 1),
                "system_memory_percent": psutil.virtual_memory().percent,
            }

    async def start_server(self, host: str = "0.0.0.0", port: int = 8088):
        """启动网关"""
        config = uvicorn.Config(app=self.app, host=host, port=port, log_level="info")
        logger.info(f"Starting toolkit gateway on {host}:{port} with {len(self.server.tools)} tools")
        await uvicorn.Server(config).serve()


def serve(host: str = "0.0.0.0", port: int = 8088):
    asyncio.run(ToolkitGateway().start_server(host=host, port=port))
