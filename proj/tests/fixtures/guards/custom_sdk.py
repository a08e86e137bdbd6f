reply = api.generate_text(
    model="house-llm@3",
    budget_tokens=64,
    response_format={"type": "json"},
)
