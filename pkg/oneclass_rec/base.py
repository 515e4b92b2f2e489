"""
工具包基础类
统一的错误类型、工具定义与运行登记
"""

import json
import logging
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from typing import Any, Awaitable, Callable, Dict, List, Optional, Union

logger = logging.getLogger(__name__)


class ToolkitError(Exception):
    """工具包错误基类"""

    default_code = 500

    def __init__(self, message: str, code: Optional[int] = None, data: Optional[Dict] = None):
        self.code = code if code is not None else self.default_code
        self.message = message
        self.data = data or {}
        super().__init__(f"Toolkit Error {self.code}: {message}")

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code, "message": self.message, "data": self.data}


class DataFormatError(ToolkitError):
    """数据行无法解析"""

    default_code = 400

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        super().__init__(message, data={"line": line, "path": path})
        self.line = line


class EmptyDatasetError(ToolkitError):
    default_code = 400


class DataFileNotFoundError(ToolkitError):
    default_code = 404


class ConfigError(ToolkitError):
    default_code = 400


class SamplingError(ToolkitError):
    """未观测样本池不足"""

    default_code = 409


class IndexOutOfRangeError(ToolkitError):
    default_code = 404


class MappingError(ToolkitError):
    default_code = 422


class NumericalError(ToolkitError):
    """损失或梯度出现非有限值"""

    default_code = 422

    def __init__(self, message: str, batch: Optional[int] = None, data: Optional[Dict] = None):
        payload = dict(data or {})
        payload["batch"] = batch
        super().__init__(message, data=payload)
        self.batch = batch


class CheckpointMismatchError(ToolkitError):
    default_code = 409


class GradientCheckError(ToolkitError):
    default_code = 500


class GenerationError(ToolkitError):
    default_code = 500


@dataclass
class ToolSpec:
    """工具定义"""
    name: str
    description: str
    input_schema: Dict[str, Any]
    output_schema: Dict[str, Any]


@dataclass
class ToolRequest:
    """JSON 请求：method + params，可带 id"""
    method: str
    params: Dict[str, Any]
    id: Optional[Any] = None

    @classmethod
    def parse(cls, payload: Union[str, bytes, Dict[str, Any]]) -> "ToolRequest":
        if isinstance(payload, (str, bytes)):
            try:
                payload = json.loads(payload)
            except json.JSONDecodeError as e:
                raise ToolkitError(f"Request is not valid JSON: {e.msg}", code=400)
        if not isinstance(payload, dict) or not isinstance(payload.get("method"), str):
            raise ToolkitError("Request needs a string 'method'", code=400)
        params = payload.get("params") or {}
        if not isinstance(params, dict):
            raise ToolkitError("'params' must be an object", code=400)
        return cls(method=payload["method"], params=params, id=payload.get("id"))


class BaseToolServer(ABC):
    """工具服务器：按 method 分发 initialize / tools/list / tools/call"""

    def __init__(self, name: str, version: str = "1.0.0"):
        self.name = name
        self.version = version
        self.tools: Dict[str, ToolSpec] = {}
        self.handlers: Dict[str, Callable[[Dict[str, Any]], Awaitable[Dict[str, Any]]]] = {
            "initialize": self._handle_initialize,
            "tools/list": self._handle_list_tools,
            "tools/call": self._handle_call_tool,
        }

    def register_tool(self, tool: ToolSpec):
        self.tools[tool.name] = tool
        logger.info(f"Registered tool: {tool.name}")

    async def handle_request(self, payload: Union[str, bytes, Dict[str, Any]]) -> Dict[str, Any]:
        """一次请求 → {"result": ..., "id": ...} 或 {"error": {code, message, data}, "id": ...}"""
        request_id = payload.get("id") if isinstance(payload, dict) else None
        try:
            request = ToolRequest.parse(payload)
            request_id = request.id
            handler = self.handlers.get(request.method)
            if handler is None:
                raise ToolkitError(f"Method not found: {request.method}", code=404)
            return {"result": await handler(request.params), "id": request_id}
        except ToolkitError as e:
            return {"error": e.to_dict(), "id": request_id}
        except Exception as e:
            logger.error(f"Unexpected error while handling request: {e}")
            error = ToolkitError("Internal server error", data={"details": str(e)})
            return {"error": error.to_dict(), "id": request_id}

    async def _handle_initialize(self, params: Dict[str, Any]) -> Dict[str, Any]:
        return {"serverInfo": {"name": self.name, "version": self.version}, "tools": sorted(self.tools)}

    async def _handle_list_tools(self, params: Dict[str, Any]) -> Dict[str, Any]:
        return {"tools": [asdict(tool) for tool in self.tools.values()]}

    async def _handle_call_tool(self, params: Dict[str, Any]) -> Dict[str, Any]:
        name = params.get("name")
        if name not in self.tools:
            raise ToolkitError(f"Tool not found: {name}", code=404)
        arguments = params.get("arguments") or {}
        if not isinstance(arguments, dict):
            raise ToolkitError("'arguments' must be an object", code=400)
        return await self.call_tool(name, arguments)

    @abstractmethod
    async def call_tool(self, name: str, arguments: Dict[str, Any]) -> Dict[str, Any]:
        """执行一个工具，返回运行结果"""


class RunRegistry:
    """运行登记中心"""

    def __init__(self):
        self.runs: Dict[str, Dict] = {}

    def register_run(self, run_id: str, command: str, out_dir: Optional[str], exit_code: int):
        """登记一次运行"""
        self.runs[run_id] = {
            "run_id": run_id,
            "command": command,
            "out_dir": out_dir,
            "exit_code": exit_code,
            "status": "succeeded" if exit_code == 0 else "failed"
        }
        logger.info(f"Run registered: {run_id} ({command}, exit {exit_code})")

    def discover_runs(self, command_filter: Optional[List[str]] = None) -> List[Dict]:
        """按命令筛选运行"""
        if not command_filter:
            return list(self.runs.values())
        return [run for run in self.runs.values() if run["command"] in command_filter]

    def get_run(self, run_id: str) -> Optional[Dict]:
        return self.runs.get(run_id)
