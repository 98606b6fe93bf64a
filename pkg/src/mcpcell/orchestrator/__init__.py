"""MCP-client side: tool discovery, planner loop, session API."""
