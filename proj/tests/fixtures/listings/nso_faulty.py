# Define a JSON schema e.g. result_schema = ...
response = openai.chat.completions.create(
    model="gpt-4o-2024-11-20", messages=messages)
