from llm_gateway.errors import AuthFailure, ExhaustedRetries, GatewayError, MalformedResponse
from llm_gateway.gateway import ChatGateway, build_gateway, chat, load_transcript
from llm_gateway.mock import MockPolicy, mock_chat
from llm_gateway.request import ChatRequest, GatewayConfig
