"""FastAPI service wrapping the twin: REST, websocket, and TCP access."""
