#!/usr/bin/env python3
"""
Chat-completion mock endpoint on tornado, for tests and dry runs.

Serves POST /v1/chat/completions with scripted responses; failures (HTTP
status codes) can be queued ahead of the scripted answers.
"""
from collections import deque
from typing import Any, Callable, Deque, Dict, Iterable, List, Optional, Sequence, Tuple
import argparse
import itertools
import json
import signal

import structlog
import tornado.httpserver
import tornado.ioloop
import tornado.netutil
import tornado.web

from .prompts import RULE_MARKER

logger = structlog.get_logger(__name__)

Responder = Callable[[str, Dict[str, Any]], str]

JUDGE_YES = "Yes, the induced rule matches the ground-truth. The hypothesis states the same condition."
JUDGE_NO = "No, the induced rule does not match. The hypothesis describes a different condition."


def default_responder(prompt: str, body: Dict[str, Any]) -> str:
    """Judges agree; induction prompts get a fixed rule."""
    if "Model-induced rule:" in prompt:
        return JUDGE_YES
    return f"{RULE_MARKER} The higher-ranked hand wins."


def queue_responder(texts: Iterable[str]) -> Responder:
    """Cycle through texts, one per request."""
    cycle = itertools.cycle(list(texts))
    return lambda prompt, body: next(cycle)


def keyword_responder(rules: Sequence[Tuple[str, str]], default: Responder = default_responder) -> Responder:
    """First rule whose keyword occurs in the prompt answers; otherwise default."""
    def respond(prompt: str, body: Dict[str, Any]) -> str:
        for keyword, text in rules:
            if keyword in prompt:
                return text
        return default(prompt, body)
    return respond


class ChatCompletionsHandler(tornado.web.RequestHandler):
    def initialize(self, server: 'MockEndpointServer'):
        self.server = server

    def post(self):
        try:
            body = json.loads(self.request.body or b"{}")
            prompt = body["messages"][-1]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            self.set_status(400)
            self.write({"error": {"message": "malformed request"}})
            return

        self.server.requests.append(body)
        if self.server.required_key is not None:
            if self.request.headers.get("Authorization") != f"Bearer {self.server.required_key}":
                self.set_status(401)
                self.write({"error": {"message": "invalid api key"}})
                return
        if self.server.failures:
            status = self.server.failures.popleft()
            logger.debug("mock_failure_injected", status=status)
            self.set_status(status)
            self.write({"error": {"message": f"injected failure {status}"}})
            return

        text = self.server.responder(prompt, body)
        completion_tokens = len(text.split())
        prompt_tokens = len(prompt.split())
        self.write({
            "id": f"mock-{len(self.server.requests)}",
            "object": "chat.completion",
            "model": body.get("model", "mock"),
            "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
            "usage": {
                "prompt_tokens": prompt_tokens,
                "completion_tokens": completion_tokens,
                "total_tokens": prompt_tokens + completion_tokens,
            },
        })


class MockEndpointServer:
    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 0,
        responder: Optional[Responder] = None,
        failures: Iterable[int] = (),
        required_key: Optional[str] = None,
    ):
        self.host = host
        self.port = port
        self.responder = responder or default_responder
        self.failures: Deque[int] = deque(failures)
        self.required_key = required_key
        self.requests: List[Dict[str, Any]] = []
        self.http_server: Optional[tornado.httpserver.HTTPServer] = None

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def make_app(self) -> tornado.web.Application:
        return tornado.web.Application([
            (r"/v1/chat/completions", ChatCompletionsHandler, dict(server=self)),
        ])

    def start(self) -> 'MockEndpointServer':
        """Bind and serve on the current event loop; port 0 picks an unused port."""
        sockets = tornado.netutil.bind_sockets(self.port, address=self.host)
        self.port = sockets[0].getsockname()[1]
        self.http_server = tornado.httpserver.HTTPServer(self.make_app())
        self.http_server.add_sockets(sockets)
        logger.info("mock_endpoint_started", url=self.base_url)
        return self

    def stop(self):
        if self.http_server is not None:
            self.http_server.stop()
            self.http_server = None
            logger.info("mock_endpoint_stopped", url=self.base_url)

    def serve_forever(self):
        self.start()
        tornado.ioloop.IOLoop.current().start()

    def shutdown(self):
        self.stop()
        tornado.ioloop.IOLoop.current().stop()


def setup_signal_handlers(server: MockEndpointServer):
    """Setup signal handlers for graceful shutdown"""
    def signal_handler(signum, frame):
        logger.info("signal_received", signum=signum)
        tornado.ioloop.IOLoop.current().add_callback_from_signal(server.shutdown)

    signal.signal(signal.SIGINT, signal_handler)
    if hasattr(signal, 'SIGTERM'):
        signal.signal(signal.SIGTERM, signal_handler)


def main(argv: Optional[Sequence[str]] = None):
    parser = argparse.ArgumentParser(description='Mock chat-completion endpoint')
    parser.add_argument('--host', default='127.0.0.1', help='Bind address')
    parser.add_argument('--port', type=int, default=8780, help='Port (0 picks an unused one)')
    parser.add_argument('--responses', help='Text file whose lines are served in turn')
    args = parser.parse_args(argv)

    responder = None
    if args.responses:
        with open(args.responses, encoding="utf-8") as f:
            responder = queue_responder(line.rstrip("\n") for line in f if line.strip())
    server = MockEndpointServer(args.host, args.port, responder)
    setup_signal_handlers(server)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        logger.info("mock_endpoint_interrupted")
    finally:
        server.stop()


if __name__ == "__main__":
    main()
