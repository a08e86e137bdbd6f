client = OpenAI()
response = client.responses.create(model=
    "gpt-4o-2024-11-20", input=prompt)
