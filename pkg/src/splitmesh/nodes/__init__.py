"""Client and server nodes and the two ways of running them."""

from .client import ClientNode
from .schedule import Step, plan_steps
from .server import ServerNode, task_metric
from .simulate import EpochResult, train

__all__ = ["ClientNode", "EpochResult", "ServerNode", "Step", "plan_steps", "task_metric", "train"]
