import openai


def handle():
    return openai.chat.completions.create(
        model="gpt-4o",
        messages=[{"role": "user", "content": "x"}],
    )
