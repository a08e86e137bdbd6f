from openai import OpenAI

client = OpenAI()

def describe_bug(screenshot_bytes):
    response = client.responses.create(
        model="gpt-4.1-mini",
        input=[
            {
                "role": "user",
                "content": [
                    {"type": "input_text",
                     "text": "Describe the bug shown in this screenshot."},
                    {"type": "input_image",
                     "image": screenshot_bytes},
                ],
            }
        ],
        temperature=0.2,
    )
    return response.output[0].content[0].text
