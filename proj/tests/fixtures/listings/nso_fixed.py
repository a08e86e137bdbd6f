# Define a JSON schema e.g. result_schema = ...
response = openai.chat.completions.create(
    model="gpt-4o-2024-11-20", response_format={
        "type": "json_schema",
        "json_schema": {"name": "Result", "schema":
        result_schema}}, messages=messages)
